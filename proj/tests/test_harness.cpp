#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "gcl/errors.h"
#include "gcl/experiment.h"
#include "gcl/report.h"
#include "gcl/studies.h"
#include "gcl/trainer.h"

using namespace gcl;
namespace fs = std::filesystem;

namespace {

const char* const kSmallConfig = R"(# small synthetic run
synth.n_samples = 160
synth.input_dim.l = 6
synth.input_dim.a = 6
synth.input_dim.v = 6
synth.coupling_strength = 0.5
model.latent_dim.l = 8
model.latent_dim.a = 8
model.latent_dim.v = 8
model.encoder_hidden = 8
model.proposal_dim = 8
model.public_dim = 8
model.consensus_hidden = 8
stage1.hidden = 8
stage1.message_dim = 4
optim.batch_size = 32
optim.lr = 0.01
train.folds = 2
train.max_epochs = 8
train.patience = 3
)";

ExperimentConfig small_config() { return parse_config(kSmallConfig); }

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               (std::string("gcl_harness_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(GCL_CLI) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

}  // namespace

TEST(Config, ParsesKeysAndComments) {
    const auto c = parse_config("optim.lr = 0.05  # faster\n\nstage1.kappa = 2\ntrain.variant = no-red\n");
    EXPECT_EQ(c.optim.learning_rate, 0.05);
    EXPECT_EQ(c.model.stage1.kappa, 2.0);
    EXPECT_EQ(c.variant, Variant::no_red);
}

TEST(Config, ResolvedViewMaterialisesDefaults) {
    const auto r = ExperimentConfig{}.resolved();
    EXPECT_EQ(r.at("optim.batch_size"), "128");
    EXPECT_EQ(r.at("optim.weight_decay"), "0.0001");
    EXPECT_EQ(r.at("train.patience"), "6");
    EXPECT_EQ(r.at("train.folds"), "5");
    EXPECT_EQ(r.at("train.max_epochs"), "200");
    EXPECT_EQ(r.at("optim.lr"), "0.001");
    EXPECT_EQ(r.size(), config_keys().size());
}

TEST(Config, RoundTripsThroughResolvedView) {
    const auto c = small_config();
    ExperimentConfig back;
    for (const auto& [k, v] : c.resolved()) back.set(k, v);
    EXPECT_EQ(back.canonical(), c.canonical());
    EXPECT_EQ(back.hash(), c.hash());
}

TEST(Config, UnknownKeyRejected) {
    EXPECT_THROW(parse_config("optim.learning_rate = 0.1\n"), ConfigError);
    EXPECT_THROW(parse_config("train.variant = no-such-variant\n"), ConfigError);
    EXPECT_THROW(parse_config("optim.lr = fast\n"), ConfigError);
}

TEST(Config, HashTracksContent) {
    auto a = small_config(), b = small_config();
    EXPECT_EQ(a.hash(), b.hash());
    b.set("optim.lr", "0.02");
    EXPECT_NE(a.hash(), b.hash());
}

TEST(Variants, ClosedSetWithUniqueNames) {
    std::set<std::string> names;
    for (Variant v : all_variants()) {
        names.insert(variant_name(v));
        EXPECT_EQ(variant_from_name(variant_name(v)), v);
        EXPECT_FALSE(variant_source(v).empty());
    }
    EXPECT_EQ(names.size(), 15u);
    EXPECT_EQ(variant_mapping().size(), all_variants().size());
}

TEST(Variants, TaskOnlyZeroesAuxiliaryWeights) {
    const auto r = apply_variant(ModelConfig{}, LossWeights{}, Variant::task_only);
    EXPECT_EQ(r.weights.loc, 0.0);
    EXPECT_EQ(r.weights.pub, 0.0);
    EXPECT_EQ(r.weights.gain, 0.0);
    EXPECT_EQ(r.weights.red, 0.0);
}

TEST(Variants, NoRedZeroesRedundancyOnly) {
    const auto r = apply_variant(ModelConfig{}, LossWeights{}, Variant::no_red);
    EXPECT_EQ(r.weights.red, 0.0);
    EXPECT_EQ(r.weights.loc, LossWeights{}.loc);
    EXPECT_EQ(r.model.gate_policy, GatePolicy::governed);
}

TEST(Variants, GatePolicies) {
    EXPECT_EQ(apply_variant(ModelConfig{}, {}, Variant::no_routing).model.gate_policy, GatePolicy::uniform_routing);
    EXPECT_EQ(apply_variant(ModelConfig{}, {}, Variant::uniform_routing).model.gate_policy, GatePolicy::uniform_routing);
    EXPECT_EQ(apply_variant(ModelConfig{}, {}, Variant::no_audit).model.gate_policy, GatePolicy::no_audit);
    EXPECT_EQ(apply_variant(ModelConfig{}, {}, Variant::full_exchange).model.gate_policy, GatePolicy::full_exchange);
}

TEST(Variants, DropLanguageLeavesTwoRoutes) {
    ModelConfig m;
    m.input_dims = {4, 4, 4};
    m.latent_dims = {6, 6, 6};
    m.stage1.message_dim = 3;
    const auto r = apply_variant(m, {}, Variant::drop_l);
    GclModel model(r.model, 3);
    Tape t;
    const Matrix x(5, 4, 0.3);
    const auto fr = model.forward(t, {x, x, x}, nullptr, {GainMode::predicted});
    std::set<std::string> routes;
    for (const auto& rec : fr.stage1.routes) routes.insert(rec.route.name());
    EXPECT_EQ(routes, (std::set<std::string>{"a->v", "v->a"}));
}

TEST(Variants, UnimodalHasNoRoutes) {
    ModelConfig m;
    m.input_dims = {4, 4, 4};
    m.latent_dims = {6, 6, 6};
    m.stage1.message_dim = 3;
    GclModel model(apply_variant(m, {}, Variant::unimodal_a).model, 3);
    Tape t;
    const Matrix x(5, 4, 0.3);
    EXPECT_TRUE(model.forward(t, {x, x, x}, nullptr, {GainMode::predicted}).stage1.routes.empty());
}

TEST(Variants, UniformAggregationWeights) {
    ModelConfig m;
    m.input_dims = {4, 4, 4};
    m.latent_dims = {6, 6, 6};
    m.stage1.message_dim = 3;
    GclModel model(apply_variant(m, {}, Variant::uniform_agg).model, 5);
    Tape t;
    Matrix x(7, 4);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(static_cast<double>(i));
    const auto fr = model.forward(t, {x, x, x}, nullptr, {GainMode::predicted});
    const Matrix& w = fr.consensus.weights.value();
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(w(i, k), 1.0 / 3.0);
}

TEST(EarlyStoppingRule, PatienceCountingExample) {
    EarlyStopping es(6);
    const std::vector<double> seq{1.0, 0.9, 0.91, 0.92, 0.93, 0.94, 0.95, 0.96};
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const bool stop = es.update(seq[i]);
        EXPECT_EQ(stop, i == seq.size() - 1) << "epoch " << i + 1;
    }
    EXPECT_EQ(es.epochs(), 8u);
    EXPECT_EQ(es.best_epoch(), 2u);
    EXPECT_EQ(es.best(), 0.9);
}

TEST(EarlyStoppingRule, TiesDoNotImprove) {
    EarlyStopping es(2);
    EXPECT_FALSE(es.update(1.0));
    EXPECT_FALSE(es.update(1.0));
    EXPECT_FALSE(es.improved());
    EXPECT_TRUE(es.update(1.0));
    EXPECT_EQ(es.best_epoch(), 1u);
}

TEST(Training, ContractsOfASmallRun) {
    const auto c = small_config();
    const TrainedRun run = train_run(c);
    const RunReport& r = run.report;
    ASSERT_EQ(r.folds.size(), 2u);
    for (const auto& f : r.folds) {
        ASSERT_EQ(f.status, "ok") << f.error;
        EXPECT_LE(f.epochs_run, f.best_epoch + c.train.patience);
        EXPECT_LE(f.epochs_run, c.train.max_epochs);
        EXPECT_EQ(f.history.size(), f.epochs_run);
        EXPECT_NEAR(f.restored_val_loss, f.best_val_loss, 1e-10);
        EXPECT_EQ(f.history[f.best_epoch - 1].val_loss, f.best_val_loss);
        EXPECT_LE(f.max_simplex_error, 1e-12);
        EXPECT_GT(f.min_weight, 0.0);
        EXPECT_TRUE(f.test.mae.has_value());
        EXPECT_TRUE(f.governance.activation_rate.has_value());
    }
    EXPECT_TRUE(r.mean_metrics.mae.has_value());
    EXPECT_NEAR(*r.mean_metrics.mae, (*r.folds[0].test.mae + *r.folds[1].test.mae) / 2.0, 1e-12);
    EXPECT_EQ(r.config, c.resolved());
    EXPECT_EQ(r.config_hash, c.hash());
    EXPECT_EQ(r.variant, "full");
    EXPECT_FALSE(r.data_provenance.empty());
    for (const char* key : {"activation_rate", "positive_gain_ratio", "dominance_index", "alignment_corr", "hsic",
                            "cka", "acc2", "f1", "model_selection"}) {
        EXPECT_TRUE(r.definitions.count(key)) << key;
    }
}

TEST(Training, FoldIsolation) {
    const auto c = small_config();
    const TrainedRun run = train_run(c);
    const std::set<std::size_t> test(run.plan.test.begin(), run.plan.test.end());
    for (const auto& f : run.plan.folds) {
        const std::set<std::size_t> train(f.train.begin(), f.train.end());
        for (std::size_t v : f.validation) EXPECT_FALSE(train.count(v));
        for (std::size_t t : test) {
            EXPECT_FALSE(train.count(t));
            EXPECT_EQ(std::count(f.validation.begin(), f.validation.end(), t), 0);
        }
    }
}

TEST(Training, BatchLargerThanTrainingSetRejected) {
    auto c = small_config();
    c.set("optim.batch_size", "1000");
    EXPECT_THROW(train_run(c), ConfigError);
    c.set("optim.batch_size", "1");
    EXPECT_THROW(train_run(c), ConfigError);
}

TEST(Training, NonFiniteLossMarksFoldFailed) {
    auto c = small_config();
    c.set("optim.lr", "1e300");
    const TrainedRun run = train_run(c);
    bool failed = false;
    for (const auto& f : run.report.folds) {
        if (f.status == "failed") {
            failed = true;
            EXPECT_FALSE(f.error.empty());
        }
    }
    EXPECT_TRUE(failed);
}

TEST(Training, GainPredictorErrorShrinksRelativeToGainVariance) {
    auto c = small_config();
    c.set("synth.n_samples", "300");
    c.set("optim.lr", "0.001");
    c.set("train.max_epochs", "10");
    c.set("train.patience", "10");
    const ExperimentData data = load_experiment_data(c);
    const SplitPlan plan = kfold_split(data.data.size(), c.train.folds, c.synth.seed, c.train.test_fraction);
    const auto& fold = plan.folds[0];
    GclModel model(model_config_for(c, data.data), 9);
    const auto relative_error = [&] {
        Tape t;
        const auto x = select_rows(data.data.features, fold.train);
        const auto y = data.data.targets(fold.train);
        const auto fr = model.forward(t, x, &y);
        double sq = 0.0, s = 0.0, ss = 0.0, n = 0.0;
        for (const auto& r : fr.stage1.routes) {
            const Matrix& d = r.teacher_gain->value();
            const Matrix& p = r.predicted_gain.value();
            for (std::size_t i = 0; i < d.size(); ++i) {
                sq += (p[i] - d[i]) * (p[i] - d[i]);
                s += d[i];
                ss += d[i] * d[i];
                n += 1.0;
            }
        }
        return (sq / n) / (ss / n - (s / n) * (s / n));
    };
    const double before = relative_error();
    const FoldReport rep = train_fold(model, c, c.weights, data.data, fold, 9);
    ASSERT_EQ(rep.status, "ok");
    EXPECT_LT(relative_error(), 0.9 * before);
}

TEST(Training, ReportsAreDeterministic) {
    const auto c = small_config();
    const RunReport a = train_run(c).report, b = train_run(c).report;
    EXPECT_EQ(report_body(a), report_body(b));
    EXPECT_EQ(report_to_json(a, false), report_to_json(b, false));
}

TEST(Training, LanguageBaselineBeatsAcousticUnderDominance) {
    auto c = small_config();
    c.set("synth.n_samples", "600");
    c.set("synth.snr.l", "8");
    c.set("synth.snr.a", "0.5");
    c.set("synth.snr.v", "0.5");
    c.set("train.max_epochs", "30");
    c.set("train.patience", "6");
    c.variant = Variant::unimodal_l;
    const double mae_l = *train_run(c).report.mean_metrics.mae;
    c.variant = Variant::unimodal_a;
    const double mae_a = *train_run(c).report.mean_metrics.mae;
    EXPECT_LT(mae_l, mae_a);
}

TEST(Reports, JsonRoundTrip) {
    RunReport r = train_run(small_config()).report;
    r.timestamp = "2026-01-01T00:00:00Z";
    r.wall_clock_seconds = 1.25;
    EXPECT_EQ(report_from_json(report_to_json(r)), r);
    EXPECT_EQ(report_to_json(r, false).count("timing"), 0u);
}

TEST(Reports, ForeignFormatRejected) {
    Json j = report_to_json(RunReport{});
    j["format"] = "something-else/1";
    EXPECT_THROW(report_from_json(j), FormatError);
    Json k = report_to_json(RunReport{});
    k.erase("folds");
    EXPECT_THROW(report_from_json(k), FormatError);
}

TEST(Reports, EmitAndLoad) {
    TempDir dir;
    const RunReport r = train_run(small_config()).report;
    emit_report(r, dir.path);
    EXPECT_EQ(load_report(dir.path / "report.json"), r);
    for (const char* f : {"losses.csv", "folds.csv", "governance.csv"}) {
        ASSERT_TRUE(fs::exists(dir.path / f)) << f;
        const std::string text = slurp(dir.path / f);
        EXPECT_NE(text.find('\n'), std::string::npos);
        EXPECT_EQ(text.find(".tmp"), std::string::npos);
    }
    std::size_t lines = 0;
    for (char ch : slurp(dir.path / "losses.csv")) lines += ch == '\n';
    std::size_t epochs = 0;
    for (const auto& f : r.folds) epochs += f.history.size();
    EXPECT_EQ(lines, epochs + 1);
    for (const auto& e : fs::directory_iterator(dir.path)) EXPECT_NE(e.path().extension(), ".tmp");
}

TEST(Reports, UnwritablePathRaisesIoError) {
    TempDir dir;
    std::ofstream(dir.path / "blocker") << "x";
    EXPECT_THROW(emit_report(RunReport{}, dir.path / "blocker" / "out"), IoError);
    EXPECT_THROW(write_atomic(dir.path / "missing" / "f.json", "{}"), IoError);
}

TEST(Reports, MissingValuesWrittenAsNa) {
    EXPECT_EQ(csv_cell(MaybeReal{}), "NA");
    EXPECT_EQ(csv_cell(MaybeReal{0.5}), "0.5");
}

TEST(Reports, CheckpointRoundTrip) {
    TempDir dir;
    const TrainedRun run = train_run(small_config());
    save_checkpoint(run, dir.path / "ckpt.json");
    const auto loaded = load_checkpoint(dir.path / "ckpt.json");
    ASSERT_EQ(loaded.size(), run.models.size());
    for (std::size_t f = 0; f < loaded.size(); ++f) EXPECT_EQ(loaded[f], run.models[f]->parameters().snapshot());
}

TEST(Cli, TwoProcessesGiveIdenticalReportBodies) {
    TempDir dir;
    std::ofstream(dir.path / "run.cfg") << kSmallConfig;
    const std::string cfg = (dir.path / "run.cfg").string();
    ASSERT_EQ(run_cli("train --config " + cfg + " --out " + (dir.path / "a").string()), 0);
    ASSERT_EQ(run_cli("train --config " + cfg + " --out " + (dir.path / "b").string()), 0);
    const RunReport a = load_report(dir.path / "a" / "report.json");
    const RunReport b = load_report(dir.path / "b" / "report.json");
    EXPECT_EQ(report_body(a), report_body(b));
    EXPECT_EQ(slurp(dir.path / "a" / "folds.csv"), slurp(dir.path / "b" / "folds.csv"));
}

TEST(Cli, GenDataThenEval) {
    TempDir dir;
    std::ofstream(dir.path / "synth.cfg") << "synth.n_samples = 120\nsynth.input_dim.l = 6\nsynth.input_dim.a = 6\n"
                                             "synth.input_dim.v = 6\n";
    const auto data = dir.path / "d.gcl";
    ASSERT_EQ(run_cli("gen-data --synth-config " + (dir.path / "synth.cfg").string() + " --out " + data.string()), 0);
    const Dataset d = load_feature_file(data);
    EXPECT_EQ(d.size(), 120u);

    std::ofstream(dir.path / "run.cfg") << kSmallConfig << "data.source = file\ndata.path = " << data.string() << "\n";
    ASSERT_EQ(run_cli("train --config " + (dir.path / "run.cfg").string() + " --out " + (dir.path / "out").string()), 0);
    const std::string eval_out = (dir.path / "eval.json").string();
    ASSERT_EQ(std::system((std::string(GCL_CLI) + " eval --report " + (dir.path / "out" / "report.json").string() +
                           " --data " + data.string() + " > " + eval_out)
                              .c_str()),
              0);
    const Json j = Json::parse(slurp(eval_out));
    EXPECT_EQ(j.at("folds").size(), 2u);
    EXPECT_TRUE(j.at("folds")[0].contains("metrics"));
}

TEST(Cli, UnknownKeyFailsWithStatus) {
    TempDir dir;
    std::ofstream(dir.path / "bad.cfg") << "optim.speed = 3\n";
    EXPECT_NE(run_cli("train --config " + (dir.path / "bad.cfg").string() + " --out " + (dir.path / "o").string()),
              0);
}

TEST(Studies, GridExpansionIsCartesian) {
    const auto axes = parse_grid("loss.lambda_red = 0, 0.05, 0.5\nstage1.kappa = 0.5, 1\n# note\noptim.lr = 0.01\n");
    ASSERT_EQ(axes.size(), 3u);
    const auto grid = expand_grid(axes);
    EXPECT_EQ(grid.size(), 6u);
    EXPECT_EQ(grid[0], (std::vector<std::pair<std::string, std::string>>{
                           {"loss.lambda_red", "0"}, {"stage1.kappa", "0.5"}, {"optim.lr", "0.01"}}));
    EXPECT_EQ(grid[1][1].second, "1");
    EXPECT_EQ(grid[2][0].second, "0.05");
    EXPECT_THROW(parse_grid("nope.key = 1\n"), ConfigError);
    EXPECT_EQ(expand_grid({}).size(), 1u);
}

TEST(Studies, SingletonGridEqualsTrainRun) {
    const auto c = small_config();
    const auto rows = sensitivity_sweep(c, parse_grid("optim.lr = 0.01\n"));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(report_body(rows[0].report), report_body(train_run(c).report));
}

TEST(Studies, VariantListParsing) {
    EXPECT_EQ(parse_variant_list("all").size(), all_variants().size());
    EXPECT_EQ(parse_variant_list("full, no-red"), (std::vector<Variant>{Variant::full, Variant::no_red}));
    EXPECT_THROW(parse_variant_list("full,bogus"), ConfigError);
}

TEST(Studies, ZeroSigmaRowEqualsCleanEvaluation) {
    const auto c = small_config();
    StudyOptions o;
    o.seeds = {4};
    const auto rows = robustness_sweep(c, {0.0, 5.0}, o);
    ASSERT_EQ(rows.size(), 2u);
    const TrainedRun run = train_run(seeded_config(c, 4, true));
    EvalOptions eo;
    eo.batch_size = c.train.batch_size;
    EXPECT_EQ(rows[0].mean, evaluate_folds(run, run.data.test_view, eo).metrics);
    EXPECT_EQ(rows[0].per_seed.size(), 1u);
    EXPECT_FALSE(rows[0].stddev.mae.has_value());
}

TEST(Studies, IdentityPermutationLeavesEvaluationUnchanged) {
    const auto c = small_config();
    StudyOptions o;
    o.seeds = {2};
    const auto s = permutation_stress(c, o, true);
    ASSERT_EQ(s.rows.size(), 1u);
    EXPECT_EQ(s.rows[0].before.metrics, s.rows[0].after.metrics);
    EXPECT_EQ(s.rows[0].before.governance, s.rows[0].after.governance);
    EXPECT_EQ(*s.mean_accuracy_drop, 0.0);
}

TEST(Studies, PermutationPreservesMessageMoments) {
    const auto c = small_config();
    const ExperimentData data = load_experiment_data(c);
    GclModel model(model_config_for(c, data.data), 1);
    std::vector<std::size_t> rows(24);
    std::iota(rows.begin(), rows.end(), 0);
    const auto x = select_rows(data.data.features, rows);
    ForwardOptions plain{GainMode::predicted};
    ForwardOptions shuffled = plain;
    Rng rng(7);
    for (Modality from : kAllModalities)
        for (Modality to : kAllModalities) {
            if (from == to) continue;
            std::vector<std::size_t> p(rows.size());
            std::iota(p.begin(), p.end(), 0);
            std::shuffle(p.begin(), p.end(), rng);
            shuffled.message_permutations[Route{from, to}] = p;
        }
    Tape t;
    const auto a = model.forward(t, x, nullptr, plain);
    const auto b = model.forward(t, x, nullptr, shuffled);
    ASSERT_EQ(a.stage1.routes.size(), 6u);
    for (std::size_t k = 0; k < a.stage1.routes.size(); ++k) {
        const Matrix& ua = a.stage1.routes[k].message.value();
        const Matrix& ub = b.stage1.routes[k].message.value();
        EXPECT_NE(ua, ub);
        for (std::size_t j = 0; j < ua.cols(); ++j) {
            std::vector<double> ca, cb;
            for (std::size_t i = 0; i < ua.rows(); ++i) {
                ca.push_back(ua(i, j));
                cb.push_back(ub(i, j));
            }
            std::sort(ca.begin(), ca.end());
            std::sort(cb.begin(), cb.end());
            EXPECT_EQ(ca, cb);
            double ma = 0, mb = 0, va = 0, vb = 0;
            for (std::size_t i = 0; i < ca.size(); ++i) {
                ma += ua(i, j);
                mb += ub(i, j);
            }
            ma /= ca.size();
            mb /= cb.size();
            for (std::size_t i = 0; i < ca.size(); ++i) {
                va += (ua(i, j) - ma) * (ua(i, j) - ma);
                vb += (ub(i, j) - mb) * (ub(i, j) - mb);
            }
            EXPECT_NEAR(ma, mb, 1e-12);
            EXPECT_NEAR(va, vb, 1e-12);
        }
    }
}
