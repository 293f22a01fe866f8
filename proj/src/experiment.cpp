#include "gcl/experiment.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "gcl/errors.h"

namespace gcl {

namespace {

struct VariantInfo {
    Variant v;
    const char* name;
    const char* source;
};

constexpr VariantInfo kVariants[] = {
    {Variant::full, "full", "GCL (full protocol)"},
    {Variant::no_routing, "no-routing", "ablation: w/o R.-Agent"},
    {Variant::no_audit, "no-audit", "ablation: w/o A.-Agent; governance: NoAudit"},
    {Variant::full_exchange, "full-exchange", "ablation: Full exchange; governance: All Exchange"},
    {Variant::uniform_routing, "uniform-routing", "governance: Uniform Routing"},
    {Variant::no_red, "no-red", "ablation: w/o L_red; coupling: NoRed"},
    {Variant::no_public, "no-public", "ablation: w/o PF.-Agent; consensus: NoPublic Agent"},
    {Variant::uniform_agg, "uniform-agg", "ablation: Uniform pi; consensus: UniformAgg"},
    {Variant::task_only, "task-only", "ablation: only L_task"},
    {Variant::unimodal_l, "unimodal-l", "ablation: only Language"},
    {Variant::unimodal_a, "unimodal-a", "ablation: only Acoustic"},
    {Variant::unimodal_v, "unimodal-v", "ablation: only Visual"},
    {Variant::drop_l, "drop-l", "ablation: w/o Language"},
    {Variant::drop_a, "drop-a", "ablation: w/o Acoustic"},
    {Variant::drop_v, "drop-v", "ablation: w/o Visual"},
};

const VariantInfo& info(Variant v) {
    for (const auto& i : kVariants)
        if (i.v == v) return i;
    throw ConfigError("unknown variant");
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

double parse_double(const std::string& key, const std::string& s) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + s + "'");
    }
    if (pos != s.size()) throw ConfigError("config: '" + key + "' expects a number, got '" + s + "'");
    return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + s + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("config: '" + key + "' expects true/false, got '" + s + "'");
}

struct Key {
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename Getter>
Key size_key(const std::string& name, Getter field) {
    return {[field](const ExperimentConfig& c) { return std::to_string(field(c)); },
            [field, name](ExperimentConfig& c, const std::string& s) {
                field(c) = static_cast<std::remove_cvref_t<decltype(field(c))>>(parse_uint(name, s));
            }};
}

template <typename Getter>
Key real_key(const std::string& name, Getter field) {
    return {[field](const ExperimentConfig& c) { return fmt_double(field(c)); },
            [field, name](ExperimentConfig& c, const std::string& s) { field(c) = parse_double(name, s); }};
}

template <typename Getter>
Key bool_key(const std::string& name, Getter field) {
    return {[field](const ExperimentConfig& c) {
                return std::string(field(c) ? "true" : "false");
            },
            [field, name](ExperimentConfig& c, const std::string& s) { field(c) = parse_bool(name, s); }};
}

const std::map<std::string, Key>& registry() {
    static const std::map<std::string, Key> keys = [] {
        std::map<std::string, Key> k;
        k["data.source"] = {[](const ExperimentConfig& c) { return c.data_source; },
                            [](ExperimentConfig& c, const std::string& s) {
                                if (s != "synthetic" && s != "file") {
                                    throw ConfigError("config: data.source must be synthetic or file, got '" + s + "'");
                                }
                                c.data_source = s;
                            }};
        k["data.path"] = {[](const ExperimentConfig& c) { return c.data_path.string(); },
                          [](ExperimentConfig& c, const std::string& s) { c.data_path = s; }};
        k["data.shift"] = bool_key("data.shift", [](auto& c) -> auto& { return c.shift; });
        k["data.test_fraction"] =
            real_key("data.test_fraction", [](auto& c) -> auto& { return c.train.test_fraction; });

        k["synth.n_samples"] =
            size_key("synth.n_samples", [](auto& c) -> auto& { return c.synth.n_samples; });
        k["synth.seed"] = size_key("synth.seed", [](auto& c) -> auto& { return c.synth.seed; });
        k["synth.task"] = {[](const ExperimentConfig& c) { return task_name(c.synth.task); },
                           [](ExperimentConfig& c, const std::string& s) { c.synth.task = task_from_name(s); }};
        k["synth.num_classes"] =
            size_key("synth.num_classes", [](auto& c) -> auto& { return c.synth.num_classes; });
        k["synth.shared_dim"] =
            size_key("synth.shared_dim", [](auto& c) -> auto& { return c.synth.shared_dim; });
        k["synth.nuisance_dim"] =
            size_key("synth.nuisance_dim", [](auto& c) -> auto& { return c.synth.nuisance_dim; });
        k["synth.coupling_strength"] = real_key(
            "synth.coupling_strength", [](auto& c) -> auto& { return c.synth.coupling_strength; });
        k["synth.label_scale"] =
            real_key("synth.label_scale", [](auto& c) -> auto& { return c.synth.label_scale; });
        k["synth.shared_share"] =
            real_key("synth.shared_share", [](auto& c) -> auto& { return c.synth.shared_share; });

        k["model.encoder_hidden"] = size_key("model.encoder_hidden",
                                             [](auto& c) -> auto& { return c.model.encoder_hidden; });
        k["model.head_hidden"] =
            size_key("model.head_hidden", [](auto& c) -> auto& { return c.model.head_hidden; });
        k["model.public_dim"] = size_key("model.public_dim",
                                         [](auto& c) -> auto& { return c.model.stage2.public_dim; });
        k["model.proposal_dim"] = size_key(
            "model.proposal_dim", [](auto& c) -> auto& { return c.model.stage2.proposal_dim; });
        k["model.consensus_hidden"] = size_key(
            "model.consensus_hidden", [](auto& c) -> auto& { return c.model.stage2.hidden; });

        k["stage1.message_dim"] = size_key(
            "stage1.message_dim", [](auto& c) -> auto& { return c.model.stage1.message_dim; });
        k["stage1.kappa"] = real_key("stage1.kappa", [](auto& c) -> auto& { return c.model.stage1.kappa; });
        k["stage1.tau_red"] =
            real_key("stage1.tau_red", [](auto& c) -> auto& { return c.model.stage1.tau_red; });
        k["stage1.hidden"] =
            size_key("stage1.hidden", [](auto& c) -> auto& { return c.model.stage1.hidden; });

        k["loss.lambda_loc"] = real_key("loss.lambda_loc", [](auto& c) -> auto& { return c.weights.loc; });
        k["loss.lambda_pub"] = real_key("loss.lambda_pub", [](auto& c) -> auto& { return c.weights.pub; });
        k["loss.lambda_gain"] =
            real_key("loss.lambda_gain", [](auto& c) -> auto& { return c.weights.gain; });
        k["loss.lambda_red"] = real_key("loss.lambda_red", [](auto& c) -> auto& { return c.weights.red; });
        k["loss.lambda_gpred"] =
            real_key("loss.lambda_gpred", [](auto& c) -> auto& { return c.weights.gpred; });

        k["optim.lr"] = real_key("optim.lr", [](auto& c) -> auto& { return c.optim.learning_rate; });
        k["optim.beta1"] = real_key("optim.beta1", [](auto& c) -> auto& { return c.optim.beta1; });
        k["optim.beta2"] = real_key("optim.beta2", [](auto& c) -> auto& { return c.optim.beta2; });
        k["optim.eps"] = real_key("optim.eps", [](auto& c) -> auto& { return c.optim.epsilon; });
        k["optim.weight_decay"] =
            real_key("optim.weight_decay", [](auto& c) -> auto& { return c.optim.weight_decay; });
        k["optim.batch_size"] =
            size_key("optim.batch_size", [](auto& c) -> auto& { return c.train.batch_size; });

        k["train.patience"] =
            size_key("train.patience", [](auto& c) -> auto& { return c.train.patience; });
        k["train.max_epochs"] =
            size_key("train.max_epochs", [](auto& c) -> auto& { return c.train.max_epochs; });
        k["train.folds"] = size_key("train.folds", [](auto& c) -> auto& { return c.train.folds; });
        k["train.seed"] = size_key("train.seed", [](auto& c) -> auto& { return c.seed; });
        k["train.variant"] = {[](const ExperimentConfig& c) { return variant_name(c.variant); },
                              [](ExperimentConfig& c, const std::string& s) { c.variant = variant_from_name(s); }};

        k["metrics.theta_ar"] = real_key("metrics.theta_ar", [](auto& c) -> auto& { return c.theta_ar; });

        for (Modality m : kAllModalities) {
            const std::size_t i = index(m);
            const std::string t(1, modality_tag(m));
            k["synth.private_dim." + t] = size_key(
                "synth.private_dim." + t, [i](auto& c) -> auto& { return c.synth.private_dim[i]; });
            k["synth.input_dim." + t] = size_key(
                "synth.input_dim." + t, [i](auto& c) -> auto& { return c.synth.input_dim[i]; });
            k["synth.snr." + t] =
                real_key("synth.snr." + t, [i](auto& c) -> auto& { return c.synth.snr[i]; });
            k["synth.noise_std." + t] = real_key(
                "synth.noise_std." + t, [i](auto& c) -> auto& { return c.synth.noise_std[i]; });
            k["synth.private_label_weight." + t] =
                real_key("synth.private_label_weight." + t,
                         [i](auto& c) -> auto& { return c.synth.private_label_weight[i]; });
            k["model.latent_dim." + t] = size_key(
                "model.latent_dim." + t, [i](auto& c) -> auto& { return c.model.latent_dims[i]; });
        }
        return k;
    }();
    return keys;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> v = [] {
        std::vector<Variant> out;
        for (const auto& i : kVariants) out.push_back(i.v);
        return out;
    }();
    return v;
}

std::string variant_name(Variant v) { return info(v).name; }
std::string variant_source(Variant v) { return info(v).source; }

Variant variant_from_name(const std::string& name) {
    for (const auto& i : kVariants)
        if (name == i.name) return i.v;
    throw ConfigError("unknown variant '" + name + "'");
}

std::map<std::string, std::string> ExperimentConfig::resolved() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, key] : registry()) out[name] = key.get(*this);
    return out;
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream os;
    for (const auto& [k, v] : resolved()) os << k << " = " << v << "\n";
    return os.str();
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(canonical())); }

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    auto it = registry().find(key);
    if (it == registry().end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second.set(*this, value);
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& [k, v] : registry()) out.push_back(k);
    return out;
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        try {
            cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
    std::ostringstream os;
    os << is.rdbuf();
    return parse_config(os.str());
}

ResolvedModel apply_variant(const ModelConfig& model, const LossWeights& weights, Variant v) {
    ResolvedModel r{model, weights};
    switch (v) {
        case Variant::full:
            break;
        case Variant::no_routing:
        case Variant::uniform_routing:
            r.model.gate_policy = GatePolicy::uniform_routing;
            break;
        case Variant::no_audit:
            r.model.gate_policy = GatePolicy::no_audit;
            break;
        case Variant::full_exchange:
            r.model.gate_policy = GatePolicy::full_exchange;
            break;
        case Variant::no_red:
            r.weights.red = 0.0;
            break;
        case Variant::no_public:
            r.model.stage2.use_public = false;
            r.weights.pub = 0.0;
            break;
        case Variant::uniform_agg:
            r.model.stage2.uniform_weights = true;
            break;
        case Variant::task_only:
            r.weights.loc = r.weights.pub = r.weights.gain = r.weights.red = 0.0;
            break;
        case Variant::unimodal_l:
            r.model.modalities = ModalitySet::only(Modality::language);
            break;
        case Variant::unimodal_a:
            r.model.modalities = ModalitySet::only(Modality::acoustic);
            break;
        case Variant::unimodal_v:
            r.model.modalities = ModalitySet::only(Modality::visual);
            break;
        case Variant::drop_l:
            r.model.modalities = ModalitySet::without(Modality::language);
            break;
        case Variant::drop_a:
            r.model.modalities = ModalitySet::without(Modality::acoustic);
            break;
        case Variant::drop_v:
            r.model.modalities = ModalitySet::without(Modality::visual);
            break;
    }
    return r;
}

ExperimentData load_experiment_data(const ExperimentConfig& config) {
    ExperimentData d;
    if (config.data_source == "file") {
        d.data = load_feature_file(config.data_path);
        d.test_view = d.data;
    } else {
        d.data = generate_synthetic(config.synth, false);
        d.test_view = config.shift ? generate_synthetic(config.synth, true) : d.data;
    }
    return d;
}

}  // namespace gcl
