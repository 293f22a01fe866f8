#include "gcl/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>

#include "gcl/errors.h"

namespace gcl {

namespace {

std::size_t argmax_row(const Matrix& m, std::size_t r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < m.cols(); ++c) {
        if (m(r, c) > m(r, best)) best = c;
    }
    return best;
}

// Appends `block` into rows [offset, offset + block.rows()) of `dst`.
void place_rows(Matrix& dst, const Matrix& block, std::size_t offset) {
    if (dst.cols() != block.cols()) dst = Matrix(dst.rows(), block.cols());
    std::copy(block.data().begin(), block.data().end(), dst.data().begin() + offset * dst.cols());
}

// Minibatches of `size`; a trailing batch of one sample joins the previous one.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t size) {
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t b = 0; b < order.size(); b += size) {
        const std::size_t e = std::min(order.size(), b + size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                             order.begin() + static_cast<std::ptrdiff_t>(e));
    }
    if (batches.size() > 1 && batches.back().size() < 2) {
        auto last = std::move(batches.back());
        batches.pop_back();
        batches.back().insert(batches.back().end(), last.begin(), last.end());
    }
    return batches;
}

TaskMetrics to_task_metrics(const EvalResult& ev, const Dataset& data, std::span<const std::size_t> rows,
                            const Matrix& outputs) {
    TaskMetrics t;
    std::vector<double> y;
    y.reserve(rows.size());
    for (std::size_t r : rows) y.push_back(data.labels[r]);
    if (data.task == TaskKind::regression) {
        const auto m = regression_metrics(ev.predictions, y);
        t.mae = m.mae;
        t.corr = m.corr;
        t.acc2 = m.acc2;
        t.acc7 = m.acc7;
        t.f1 = m.f1;
    } else {
        const auto m = classification_metrics(outputs, y);
        t.accuracy = m.accuracy;
        t.precision = m.precision;
        t.recall = m.recall;
        t.f1 = m.f1;
    }
    return t;
}

MaybeReal mean_of(const std::vector<MaybeReal>& values) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& v : values) {
        if (v) {
            s += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return s / static_cast<double>(n);
}

template <class T, class F>
MaybeReal mean_field(const std::vector<T>& all, F field) {
    std::vector<MaybeReal> v;
    for (const auto& x : all) v.push_back(field(x));
    return mean_of(v);
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

bool EarlyStopping::update(double validation_loss) {
    ++epochs_;
    improved_ = best_epoch_ == 0 || validation_loss < best_;
    if (improved_) {
        best_ = validation_loss;
        best_epoch_ = epochs_;
        stale_ = 0;
    } else {
        ++stale_;
    }
    return stale_ >= patience_;
}

Matrix marginal_utilities(const GclModel& model, const Matrix& weights, const std::vector<Matrix>& proposals,
                          const std::optional<Matrix>& c, const Targets& targets) {
    const std::size_t n = weights.rows();
    Tape tape;
    const Tensor w = tape.constant(weights);
    std::optional<Tensor> ct;
    if (c) ct = tape.constant(*c);
    std::vector<Tensor> props;
    for (const auto& p : proposals) props.push_back(tape.constant(p));
    const auto loss_with = [&](const std::vector<Tensor>& ps) {
        return per_sample_loss(model.stage2().predict(tape, combine_proposals(w, ps), ct), targets).value();
    };
    const Matrix base = loss_with(props);
    Matrix u(n, proposals.size());
    for (std::size_t k = 0; k < proposals.size(); ++k) {
        const Matrix& p = proposals[k];
        Matrix avg(n, p.cols());
        for (std::size_t j = 0; j < p.cols(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += p(i, j);
            for (std::size_t i = 0; i < n; ++i) avg(i, j) = s / static_cast<double>(n);
        }
        auto masked = props;
        masked[k] = tape.constant(std::move(avg));
        const Matrix l = loss_with(masked);
        for (std::size_t i = 0; i < n; ++i) u(i, k) = l(i, 0) - base(i, 0);
    }
    return u;
}

double validation_task_loss(const GclModel& model, const Dataset& data, std::span<const std::size_t> rows,
                            std::size_t batch_size) {
    if (rows.empty()) throw ConfigError("validation set is empty");
    double total = 0.0;
    ForwardOptions fo;
    fo.mode = GainMode::predicted;
    for (std::size_t b = 0; b < rows.size(); b += batch_size) {
        const auto sub = rows.subspan(b, std::min(batch_size, rows.size() - b));
        Tape tape;
        const Targets t = data.targets(sub);
        const auto fr = model.forward(tape, select_rows(data.features, sub), nullptr, fo);
        for (double v : per_sample_loss(fr.consensus.prediction, t).value().values()) total += v;
    }
    return total / static_cast<double>(rows.size());
}

EvalResult evaluate(const GclModel& model, const Dataset& data, std::span<const std::size_t> rows,
                    const EvalOptions& options) {
    const ModelConfig& cfg = model.config();
    const auto members = cfg.modalities.members();
    const auto routes = directed_routes(cfg.modalities);
    const std::size_t n = rows.size();
    if (n == 0) throw ConfigError("evaluate: no rows");
    const std::size_t bs = std::max<std::size_t>(1, options.batch_size);

    EvalResult out;
    out.weights = Matrix(n, members.size());
    Matrix outputs(n, cfg.output_dim());
    std::vector<Matrix> proposals(members.size(), Matrix(n, 0));
    std::optional<Matrix> c;
    for (Modality m : members) out.channels[index(m)] = Matrix(n, cfg.latent_dims[index(m)]);
    double loss_sum = 0.0;

    const bool permute = options.permutation_seed.has_value() || options.identity_permutation;
    std::size_t chunk = 0;
    for (std::size_t b = 0; b < n; b += bs, ++chunk) {
        const auto sub = rows.subspan(b, std::min(bs, n - b));
        Tape tape;
        const Targets t = data.targets(sub);
        ForwardOptions fo;
        fo.mode = GainMode::predicted;
        if (permute) {
            if (sub.size() < 2) out.permutation_degenerate = true;
            Rng rng(mix_seed(options.permutation_seed.value_or(0), chunk));
            for (const Route& r : routes) {
                std::vector<std::size_t> p(sub.size());
                std::iota(p.begin(), p.end(), 0);
                if (!options.identity_permutation) std::shuffle(p.begin(), p.end(), rng);
                fo.message_permutations[r] = std::move(p);
            }
        }
        const auto fr = model.forward(tape, select_rows(data.features, sub), &t, fo);
        for (double v : per_sample_loss(fr.consensus.prediction, t).value().values()) loss_sum += v;
        place_rows(outputs, fr.consensus.prediction.value(), b);
        place_rows(out.weights, fr.consensus.weights.value(), b);
        for (std::size_t k = 0; k < members.size(); ++k) {
            place_rows(proposals[k], fr.consensus.proposals[k].value(), b);
            place_rows(out.channels[index(members[k])], fr.stage1.channel(members[k]).value(), b);
        }
        if (fr.consensus.c) {
            if (!c) c = Matrix(n, fr.consensus.c->cols());
            place_rows(*c, fr.consensus.c->value(), b);
        }
        for (const auto& rec : fr.stage1.routes) {
            for (double g : rec.gate.value().values()) out.gates.push_back(g);
            for (double d : rec.teacher_gain->value().values()) out.gains.push_back(d);
        }
    }

    out.task_loss = loss_sum / static_cast<double>(n);
    out.predictions.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.predictions[i] = cfg.task == TaskKind::regression ? outputs(i, 0) : static_cast<double>(argmax_row(outputs, i));
    }
    out.metrics = to_task_metrics(out, data, rows, outputs);

    GovernanceDiagnostics& g = out.governance;
    if (!out.gates.empty()) {
        const auto rates = governance_rates(out.gates, out.gains, options.theta_ar);
        g.activation_rate = rates.activation_rate;
        g.positive_gain_ratio = rates.positive_gain_ratio;
    }
    std::vector<MaybeReal> hs, ck;
    for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = i + 1; j < members.size(); ++j) {
            const std::string key = modality_tag(members[i]) + "-" + modality_tag(members[j]);
            MaybeReal h, k;
            if (n >= 4) {
                const auto cd =
                    coupling_diagnostics(out.channels[index(members[i])], out.channels[index(members[j])]);
                h = cd.hsic;
                k = cd.cka;
            }
            g.hsic[key] = h;
            g.cka[key] = k;
            hs.push_back(h);
            ck.push_back(k);
        }
    }
    g.mean_hsic = mean_of(hs);
    g.mean_cka = mean_of(ck);

    const Targets all = data.targets(rows);
    out.utilities = marginal_utilities(model, out.weights, proposals, c, all);
    const auto cd = consensus_diagnostics(out.weights, out.utilities);
    g.dominance_index = cd.dominance_index;
    g.alignment_corr = cd.alignment_corr;
    return out;
}

std::map<std::string, std::string> metric_definitions() {
    return {
        {"acc2", "acc2/v1: sign agreement over samples with y != 0"},
        {"acc7", "acc7/v1: round(clamp(x, -3, 3)) agreement"},
        {"f1", "f1/v1: macro F1 over classes present in y; regression uses the two-class sign decision"},
        {"hsic", "hsic/v1: linear kernel, trace(KHLH)/(N-1)^2"},
        {"cka", "cka/v1: linear CKA, missing when a self-HSIC is zero"},
        {"activation_rate", "ar/v1: share of (route, sample) gates above theta"},
        {"positive_gain_ratio", "pgr/v1: share of open gates with teacher gain > 0"},
        {"dominance_index", "d/v1: 1 - H(mean pi)/ln|M|"},
        {"alignment_corr", "align/v1: pooled Pearson(pi, loss increase when the proposal is replaced by its mean)"},
        {"model_selection", "select/v1: validation task loss under predicted-gain inference"},
        {"coupling_pairs", "pairs/v1: unordered z-channel pairs, averaged"},
    };
}

std::map<std::string, std::string> variant_mapping() {
    std::map<std::string, std::string> m;
    for (Variant v : all_variants()) m[variant_name(v)] = variant_source(v);
    return m;
}

ModelConfig model_config_for(const ExperimentConfig& config, const Dataset& data) {
    ModelConfig m = config.model;
    m.task = data.task;
    m.num_classes = data.num_classes;
    m.input_dims = data.input_dims();
    return m;
}

FoldReport train_fold(GclModel& model, const ExperimentConfig& config, const LossWeights& weights,
                      const Dataset& data, const FoldIndices& fold, std::uint64_t seed) {
    FoldReport rep;
    const std::size_t bs = config.train.batch_size;
    if (bs < 2 || bs > fold.train.size()) {
        throw ConfigError("batch size " + std::to_string(bs) + " must lie in [2, " +
                          std::to_string(fold.train.size()) + "]");
    }
    Adam adam(config.optim);
    EarlyStopping stopper(config.train.patience);
    Rng rng(seed);
    auto best = model.parameters().snapshot();
    std::vector<std::size_t> order = fold.train;
    try {
        for (std::size_t epoch = 1; epoch <= config.train.max_epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            double train_sum = 0.0;
            for (const auto& batch : make_batches(order, bs)) {
                Tape tape;
                const Targets t = data.targets(batch);
                const auto fr = model.forward(tape, select_rows(data.features, batch), &t);
                const auto obj = total_loss(model.loss_terms(tape, fr, t), weights);
                const Matrix& pi = fr.consensus.weights.value();
                for (std::size_t i = 0; i < pi.rows(); ++i) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < pi.cols(); ++k) {
                        s += pi(i, k);
                        rep.min_weight = std::min(rep.min_weight, pi(i, k));
                    }
                    rep.max_simplex_error = std::max(rep.max_simplex_error, std::abs(s - 1.0));
                }
                model.parameters().zero_grad();
                tape.backward(obj.total);
                adam.step(model.parameters());
                train_sum += obj.report.total * static_cast<double>(batch.size());
            }
            const double val = validation_task_loss(model, data, fold.validation, bs);
            if (!std::isfinite(val)) throw NonFiniteError("validation loss is not finite");
            rep.history.push_back({epoch, train_sum / static_cast<double>(order.size()), val});
            const bool stop = stopper.update(val);
            if (stopper.improved()) best = model.parameters().snapshot();
            if (stop) break;
        }
    } catch (const NonFiniteError& e) {
        rep.status = "failed";
        rep.error = "epoch " + std::to_string(rep.history.size() + 1) + ": " + e.what();
    }
    rep.epochs_run = rep.history.size();
    rep.best_epoch = stopper.best_epoch();
    rep.best_val_loss = stopper.best();
    if (rep.status == "ok") {
        model.parameters().restore(best);
        rep.restored_val_loss = validation_task_loss(model, data, fold.validation, bs);
    }
    return rep;
}

TrainedRun train_run(const ExperimentConfig& config) { return train_run(config, load_experiment_data(config)); }

TrainedRun train_run(const ExperimentConfig& config, ExperimentData data) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainedRun run;
    run.data = std::move(data);
    const Dataset& ds = run.data.data;
    run.resolved = apply_variant(model_config_for(config, ds), config.weights, config.variant);
    run.plan = kfold_split(ds.size(), config.train.folds, config.synth.seed, config.train.test_fraction);
    if (run.plan.test.empty()) throw ConfigError("test partition is empty");

    RunReport& r = run.report;
    r.config = config.resolved();
    r.config_hash = config.hash();
    r.seed = config.seed;
    r.variant = variant_name(config.variant);
    r.variant_map = variant_mapping();
    r.definitions = metric_definitions();
    r.data_provenance = ds.provenance;

    EvalOptions eo;
    eo.theta_ar = config.theta_ar;
    eo.batch_size = config.train.batch_size;
    std::vector<TaskMetrics> ok_metrics;
    std::vector<GovernanceDiagnostics> ok_gov;
    for (std::size_t f = 0; f < run.plan.folds.size(); ++f) {
        auto model = std::make_unique<GclModel>(run.resolved.model, mix_seed(config.seed, 1000 + f));
        FoldReport fr = train_fold(*model, config, run.resolved.weights, ds, run.plan.folds[f],
                                   mix_seed(config.seed, 2000 + f));
        fr.fold = f;
        if (fr.status == "ok") {
            const auto ev = evaluate(*model, run.data.test_view, run.plan.test, eo);
            fr.test = ev.metrics;
            fr.governance = ev.governance;
            ok_metrics.push_back(fr.test);
            ok_gov.push_back(fr.governance);
            run.models.push_back(std::move(model));
        } else {
            run.models.push_back(nullptr);
        }
        r.folds.push_back(std::move(fr));
    }
    r.mean_metrics = mean_metrics(ok_metrics);
    r.mean_governance = mean_governance(ok_gov);
    r.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.timestamp = utc_timestamp();
    return run;
}

TaskMetrics mean_metrics(const std::vector<TaskMetrics>& all) {
    TaskMetrics m;
    m.mae = mean_field(all, [](const TaskMetrics& t) { return t.mae; });
    m.corr = mean_field(all, [](const TaskMetrics& t) { return t.corr; });
    m.acc2 = mean_field(all, [](const TaskMetrics& t) { return t.acc2; });
    m.acc7 = mean_field(all, [](const TaskMetrics& t) { return t.acc7; });
    m.f1 = mean_field(all, [](const TaskMetrics& t) { return t.f1; });
    m.accuracy = mean_field(all, [](const TaskMetrics& t) { return t.accuracy; });
    m.precision = mean_field(all, [](const TaskMetrics& t) { return t.precision; });
    m.recall = mean_field(all, [](const TaskMetrics& t) { return t.recall; });
    return m;
}

GovernanceDiagnostics mean_governance(const std::vector<GovernanceDiagnostics>& all) {
    using G = GovernanceDiagnostics;
    G m;
    m.activation_rate = mean_field(all, [](const G& g) { return g.activation_rate; });
    m.positive_gain_ratio = mean_field(all, [](const G& g) { return g.positive_gain_ratio; });
    m.mean_hsic = mean_field(all, [](const G& g) { return g.mean_hsic; });
    m.mean_cka = mean_field(all, [](const G& g) { return g.mean_cka; });
    m.dominance_index = mean_field(all, [](const G& g) { return g.dominance_index; });
    m.alignment_corr = mean_field(all, [](const G& g) { return g.alignment_corr; });
    if (!all.empty()) {
        for (const auto& [key, _] : all.front().hsic) {
            m.hsic[key] = mean_field(all, [&](const G& g) { return g.hsic.count(key) ? g.hsic.at(key) : MaybeReal{}; });
            m.cka[key] = mean_field(all, [&](const G& g) { return g.cka.count(key) ? g.cka.at(key) : MaybeReal{}; });
        }
    }
    return m;
}

}  // namespace gcl
