#include "gcl/report.h"

#include <charconv>
#include <fstream>
#include <sstream>

#include "gcl/errors.h"

namespace gcl {

namespace {

Json opt(const MaybeReal& v) { return v ? Json(*v) : Json(nullptr); }

MaybeReal opt_from(const Json& j, const char* key) {
    if (!j.contains(key)) throw FormatError(std::string("report: missing field '") + key + "'");
    const Json& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

const Json& field(const Json& j, const char* key) {
    if (!j.contains(key)) throw FormatError(std::string("report: missing field '") + key + "'");
    return j.at(key);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Json parse(const std::string& text, const std::filesystem::path& path) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace

Json metrics_to_json(const TaskMetrics& m) {
    return Json{{"mae", opt(m.mae)},           {"corr", opt(m.corr)},       {"acc2", opt(m.acc2)},
                {"acc7", opt(m.acc7)},         {"f1", opt(m.f1)},           {"accuracy", opt(m.accuracy)},
                {"precision", opt(m.precision)}, {"recall", opt(m.recall)}};
}

TaskMetrics metrics_from_json(const Json& j) {
    TaskMetrics m;
    m.mae = opt_from(j, "mae");
    m.corr = opt_from(j, "corr");
    m.acc2 = opt_from(j, "acc2");
    m.acc7 = opt_from(j, "acc7");
    m.f1 = opt_from(j, "f1");
    m.accuracy = opt_from(j, "accuracy");
    m.precision = opt_from(j, "precision");
    m.recall = opt_from(j, "recall");
    return m;
}

Json governance_to_json(const GovernanceDiagnostics& g) {
    Json hsic = Json::object(), cka = Json::object();
    for (const auto& [k, v] : g.hsic) hsic[k] = opt(v);
    for (const auto& [k, v] : g.cka) cka[k] = opt(v);
    return Json{{"activation_rate", opt(g.activation_rate)},
                {"positive_gain_ratio", opt(g.positive_gain_ratio)},
                {"hsic", hsic},
                {"cka", cka},
                {"mean_hsic", opt(g.mean_hsic)},
                {"mean_cka", opt(g.mean_cka)},
                {"dominance_index", opt(g.dominance_index)},
                {"alignment_corr", opt(g.alignment_corr)}};
}

GovernanceDiagnostics governance_from_json(const Json& j) {
    GovernanceDiagnostics g;
    g.activation_rate = opt_from(j, "activation_rate");
    g.positive_gain_ratio = opt_from(j, "positive_gain_ratio");
    for (const auto& [k, v] : field(j, "hsic").items()) g.hsic[k] = v.is_null() ? MaybeReal{} : v.get<double>();
    for (const auto& [k, v] : field(j, "cka").items()) g.cka[k] = v.is_null() ? MaybeReal{} : v.get<double>();
    g.mean_hsic = opt_from(j, "mean_hsic");
    g.mean_cka = opt_from(j, "mean_cka");
    g.dominance_index = opt_from(j, "dominance_index");
    g.alignment_corr = opt_from(j, "alignment_corr");
    return g;
}

Json report_to_json(const RunReport& r, bool include_timing) {
    Json folds = Json::array();
    for (const auto& f : r.folds) {
        Json hist = Json::array();
        for (const auto& e : f.history) hist.push_back(Json::array({e.epoch, e.train_loss, e.val_loss}));
        folds.push_back(Json{{"fold", f.fold},
                             {"status", f.status},
                             {"error", f.error},
                             {"best_epoch", f.best_epoch},
                             {"epochs_run", f.epochs_run},
                             {"best_val_loss", f.best_val_loss},
                             {"restored_val_loss", f.restored_val_loss},
                             {"max_simplex_error", f.max_simplex_error},
                             {"min_weight", f.min_weight},
                             {"history", hist},
                             {"test", metrics_to_json(f.test)},
                             {"governance", governance_to_json(f.governance)}});
    }
    Json j{{"format", r.format},
           {"command", r.command},
           {"config_hash", r.config_hash},
           {"seed", r.seed},
           {"variant", r.variant},
           {"config", r.config},
           {"variant_map", r.variant_map},
           {"definitions", r.definitions},
           {"data_provenance", r.data_provenance},
           {"folds", folds},
           {"mean_metrics", metrics_to_json(r.mean_metrics)},
           {"mean_governance", governance_to_json(r.mean_governance)},
           {"checkpoint", r.checkpoint}};
    if (include_timing) {
        j["timing"] = Json{{"wall_clock_seconds", r.wall_clock_seconds}, {"timestamp", r.timestamp}};
    }
    return j;
}

RunReport report_from_json(const Json& j) {
    RunReport r;
    if (!j.is_object() || field(j, "format").get<std::string>() != r.format) {
        throw FormatError("report: expected format '" + r.format + "'");
    }
    try {
        r.command = field(j, "command").get<std::string>();
        r.config_hash = field(j, "config_hash").get<std::string>();
        r.seed = field(j, "seed").get<std::uint64_t>();
        r.variant = field(j, "variant").get<std::string>();
        r.config = field(j, "config").get<std::map<std::string, std::string>>();
        r.variant_map = field(j, "variant_map").get<std::map<std::string, std::string>>();
        r.definitions = field(j, "definitions").get<std::map<std::string, std::string>>();
        r.data_provenance = field(j, "data_provenance").get<std::string>();
        for (const auto& fj : field(j, "folds")) {
            FoldReport f;
            f.fold = field(fj, "fold").get<std::size_t>();
            f.status = field(fj, "status").get<std::string>();
            f.error = field(fj, "error").get<std::string>();
            f.best_epoch = field(fj, "best_epoch").get<std::size_t>();
            f.epochs_run = field(fj, "epochs_run").get<std::size_t>();
            f.best_val_loss = field(fj, "best_val_loss").get<double>();
            f.restored_val_loss = field(fj, "restored_val_loss").get<double>();
            f.max_simplex_error = field(fj, "max_simplex_error").get<double>();
            f.min_weight = field(fj, "min_weight").get<double>();
            for (const auto& e : field(fj, "history")) {
                f.history.push_back({e.at(0).get<std::size_t>(), e.at(1).get<double>(), e.at(2).get<double>()});
            }
            f.test = metrics_from_json(field(fj, "test"));
            f.governance = governance_from_json(field(fj, "governance"));
            r.folds.push_back(std::move(f));
        }
        r.mean_metrics = metrics_from_json(field(j, "mean_metrics"));
        r.mean_governance = governance_from_json(field(j, "mean_governance"));
        r.checkpoint = field(j, "checkpoint").get<std::string>();
        if (j.contains("timing")) {
            r.wall_clock_seconds = field(j["timing"], "wall_clock_seconds").get<double>();
            r.timestamp = field(j["timing"], "timestamp").get<std::string>();
        }
    } catch (const Json::exception& e) {
        throw FormatError(std::string("report: ") + e.what());
    }
    return r;
}

std::string report_body(const RunReport& r) { return report_to_json(r, false).dump(2); }

void write_atomic(const std::filesystem::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string csv_cell(const MaybeReal& v) { return v ? csv_cell(*v) : "NA"; }

std::string csv_cell(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

const char* const kMetricColumns =
    "mae,corr,acc2,acc7,f1,accuracy,precision,recall,activation_rate,positive_gain_ratio,mean_hsic,mean_cka,"
    "dominance_index,alignment_corr";

std::string metric_cells(const TaskMetrics& m, const GovernanceDiagnostics& g) {
    const MaybeReal cells[] = {m.mae,      m.corr,      m.acc2, m.acc7, m.f1, m.accuracy,
                               m.precision, m.recall,    g.activation_rate, g.positive_gain_ratio,
                               g.mean_hsic, g.mean_cka, g.dominance_index, g.alignment_corr};
    std::string s;
    for (const auto& c : cells) {
        if (!s.empty()) s += ',';
        s += csv_cell(c);
    }
    return s;
}

void emit_report(const RunReport& r, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_atomic(dir / "report.json", report_to_json(r).dump(2) + "\n");

    std::string losses = "fold,epoch,train_loss,val_loss\n";
    std::string folds = std::string("fold,status,best_epoch,epochs_run,best_val_loss,") + kMetricColumns + "\n";
    std::string gov = "fold,activation_rate,positive_gain_ratio,dominance_index,alignment_corr\n";
    for (const auto& f : r.folds) {
        for (const auto& e : f.history) {
            losses += std::to_string(f.fold) + "," + std::to_string(e.epoch) + "," + csv_cell(e.train_loss) + "," +
                      csv_cell(e.val_loss) + "\n";
        }
        folds += std::to_string(f.fold) + "," + f.status + "," + std::to_string(f.best_epoch) + "," +
                 std::to_string(f.epochs_run) + "," + csv_cell(f.best_val_loss) + "," +
                 metric_cells(f.test, f.governance) + "\n";
        if (f.status == "ok") {
            gov += std::to_string(f.fold) + "," + csv_cell(f.governance.activation_rate) + "," +
                   csv_cell(f.governance.positive_gain_ratio) + "," + csv_cell(f.governance.dominance_index) + "," +
                   csv_cell(f.governance.alignment_corr) + "\n";
        }
    }
    write_atomic(dir / "losses.csv", losses);
    write_atomic(dir / "folds.csv", folds);
    write_atomic(dir / "governance.csv", gov);
}

RunReport load_report(const std::filesystem::path& path) { return report_from_json(parse(read_file(path), path)); }

void save_checkpoint(const TrainedRun& run, const std::filesystem::path& path) {
    Json folds = Json::array();
    for (const auto& model : run.models) {
        if (!model) {
            folds.push_back(nullptr);
            continue;
        }
        Json params = Json::array();
        for (const auto& p : model->parameters()) {
            params.push_back(Json{{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()},
                                  {"values", p.value.values()}});
        }
        folds.push_back(params);
    }
    write_atomic(path, Json{{"format", "gcl-checkpoint/1"}, {"folds", folds}}.dump() + "\n");
}

std::vector<std::vector<Matrix>> load_checkpoint(const std::filesystem::path& path) {
    const Json j = parse(read_file(path), path);
    if (!j.contains("format") || j["format"] != "gcl-checkpoint/1") {
        throw FormatError(path.string() + ": not a checkpoint");
    }
    std::vector<std::vector<Matrix>> out;
    try {
        for (const auto& fold : j.at("folds")) {
            std::vector<Matrix> values;
            if (!fold.is_null()) {
                for (const auto& p : fold) {
                    values.emplace_back(p.at("rows").get<std::size_t>(), p.at("cols").get<std::size_t>(),
                                        p.at("values").get<std::vector<double>>());
                }
            }
            out.push_back(std::move(values));
        }
    } catch (const Json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace gcl
