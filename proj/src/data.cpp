#include "gcl/data.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "gcl/errors.h"
#include "gcl/nn.h"

namespace gcl {

std::array<std::size_t, kNumModalities> Dataset::input_dims() const {
    return {features[0].cols(), features[1].cols(), features[2].cols()};
}

Targets Dataset::targets(std::span<const std::size_t> rows) const {
    std::vector<double> y;
    y.reserve(rows.size());
    for (std::size_t r : rows) y.push_back(labels.at(r));
    return task == TaskKind::regression ? Targets::regression(y) : Targets::classification(y, num_classes);
}

Targets Dataset::all_targets() const {
    return task == TaskKind::regression ? Targets::regression(labels) : Targets::classification(labels, num_classes);
}

void Dataset::validate() const {
    for (Modality m : kAllModalities) {
        const Matrix& x = features[index(m)];
        if (x.rows() != labels.size()) {
            std::ostringstream os;
            os << "dataset: modality '" << modality_tag(m) << "' has " << x.rows() << " rows, labels " << labels.size();
            throw FormatError(os.str());
        }
        if (!x.all_finite()) throw FormatError(std::string("dataset: non-finite feature in modality '") + modality_tag(m) + "'");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double y = labels[i];
        const bool ok = task == TaskKind::regression
                            ? (std::isfinite(y) && y >= -3.0 && y <= 3.0)
                            : (y >= 0.0 && y < static_cast<double>(num_classes) && y == std::floor(y));
        if (!ok) {
            std::ostringstream os;
            os << "dataset: label " << y << " at row " << i << " outside the " << task_name(task) << " range";
            throw FormatError(os.str());
        }
    }
}

std::string SynthConfig::canonical() const {
    std::ostringstream os;
    os << std::setprecision(17) << "n=" << n_samples << ";seed=" << seed << ";task=" << task_name(task)
       << ";C=" << num_classes << ";shared=" << shared_dim << ";nuisance=" << nuisance_dim
       << ";coupling=" << coupling_strength << ";label_scale=" << label_scale << ";shared_share=" << shared_share;
    for (Modality m : kAllModalities) {
        const std::size_t i = index(m);
        os << ";" << modality_tag(m) << "=(" << private_dim[i] << "," << input_dim[i] << "," << snr[i] << ","
           << noise_std[i] << "," << private_label_weight[i] << ")";
    }
    return os.str();
}

void SynthConfig::validate() const {
    if (shared_dim == 0 || nuisance_dim == 0) throw ConfigError("synth: dims must be positive");
    for (std::size_t i = 0; i < kNumModalities; ++i) {
        if (private_dim[i] == 0 || input_dim[i] == 0) throw ConfigError("synth: dims must be positive");
        if (!(snr[i] > 0.0)) throw ConfigError("synth: snr must be positive");
        if (!(noise_std[i] >= 0.0)) throw ConfigError("synth: noise_std must be non-negative");
        if (!(private_label_weight[i] >= 0.0)) throw ConfigError("synth: private_label_weight must be non-negative");
    }
    if (!(coupling_strength >= 0.0 && coupling_strength <= 1.0)) throw ConfigError("synth: coupling_strength must lie in [0, 1]");
    if (!(shared_share >= 0.0 && shared_share <= 1.0)) throw ConfigError("synth: shared_share must lie in [0, 1]");
    if (!(label_scale > 0.0)) throw ConfigError("synth: label_scale must be positive");
    if (task == TaskKind::classification && num_classes < 2) throw ConfigError("synth: classification needs >= 2 classes");
}

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = stddev * n(rng);
    return m;
}

// Rescales w so that the variance of w . z for z ~ N(0, I) equals `var`.
void scale_to_variance(Matrix& w, double var) {
    double ss = 0.0;
    for (double v : w.data()) ss += v * v;
    const double f = ss > 0.0 ? std::sqrt(var / ss) : 0.0;
    for (double& v : w.data()) v *= f;
}

}  // namespace

SynthDetail generate_synthetic_detail(const SynthConfig& cfg, bool shifted) {
    cfg.validate();
    const std::size_t n = cfg.n_samples;
    Rng param_rng(mix_seed(cfg.seed, 0)), factor_rng(mix_seed(cfg.seed, 1)), nuisance_rng(mix_seed(cfg.seed, 2)),
        noise_rng(mix_seed(cfg.seed, 3));

    // Fixed maps.
    std::array<Matrix, kNumModalities> A, B;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
        const std::size_t k = cfg.shared_dim + cfg.private_dim[m];
        A[m] = gaussian(cfg.input_dim[m], k, 1.0 / std::sqrt(static_cast<double>(k)), param_rng);
        B[m] = gaussian(cfg.input_dim[m], cfg.nuisance_dim, 1.0 / std::sqrt(static_cast<double>(cfg.nuisance_dim)),
                        param_rng);
    }
    const double label_var = cfg.label_scale * cfg.label_scale;
    Matrix w_shared = gaussian(cfg.shared_dim, 1, 1.0, param_rng);
    scale_to_variance(w_shared, label_var * cfg.shared_share);
    const double pw_total = cfg.private_label_weight[0] + cfg.private_label_weight[1] + cfg.private_label_weight[2];
    std::array<Matrix, kNumModalities> w_private;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
        w_private[m] = gaussian(cfg.private_dim[m], 1, 1.0, param_rng);
        const double share = pw_total > 0.0 ? cfg.private_label_weight[m] / pw_total : 0.0;
        scale_to_variance(w_private[m], label_var * (1.0 - cfg.shared_share) * share);
    }

    // Per-sample draws.
    Matrix s = gaussian(n, cfg.shared_dim, 1.0, factor_rng);
    std::array<Matrix, kNumModalities> p;
    for (std::size_t m = 0; m < kNumModalities; ++m) p[m] = gaussian(n, cfg.private_dim[m], 1.0, factor_rng);
    Matrix g = gaussian(n, cfg.nuisance_dim, 1.0, nuisance_rng);
    std::array<Matrix, kNumModalities> g_m;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
        if (shifted) {
            Rng r(mix_seed(cfg.seed, 10 + m));
            g_m[m] = gaussian(n, cfg.nuisance_dim, 1.0, r);
        } else {
            g_m[m] = g;
        }
    }
    std::array<Matrix, kNumModalities> eps;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
        eps[m] = gaussian(n, cfg.input_dim[m], cfg.noise_std[m] / cfg.snr[m], noise_rng);
    }

    SynthDetail out;
    Dataset& d = out.data;
    d.task = cfg.task;
    d.num_classes = cfg.task == TaskKind::classification ? cfg.num_classes : 0;
    d.provenance = "synthetic:" + hex64(fnv1a64(cfg.canonical())) + ":seed=" + std::to_string(cfg.seed) +
                   (shifted ? ":shifted" : "");
    std::vector<double> score(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double y = 0.0;
        for (std::size_t k = 0; k < cfg.shared_dim; ++k) y += w_shared[k] * s(i, k);
        for (std::size_t m = 0; m < kNumModalities; ++m)
            for (std::size_t k = 0; k < cfg.private_dim[m]; ++k) y += w_private[m][k] * p[m](i, k);
        score[i] = y;
    }
    for (std::size_t m = 0; m < kNumModalities; ++m) {
        const std::size_t dim = cfg.input_dim[m];
        Matrix x(n, dim), res(n, dim), nui(n, dim);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < dim; ++j) {
                double signal = 0.0;
                for (std::size_t k = 0; k < cfg.shared_dim; ++k) signal += A[m](j, k) * s(i, k);
                for (std::size_t k = 0; k < cfg.private_dim[m]; ++k) signal += A[m](j, cfg.shared_dim + k) * p[m](i, k);
                double nz = 0.0;
                for (std::size_t k = 0; k < cfg.nuisance_dim; ++k) nz += B[m](j, k) * g_m[m](i, k);
                nz *= cfg.coupling_strength;
                nui(i, j) = nz;
                res(i, j) = nz + eps[m](i, j);
                x(i, j) = signal + res(i, j);
            }
        }
        d.features[m] = std::move(x);
        out.residual[m] = std::move(res);
        out.nuisance[m] = std::move(nui);
    }
    if (cfg.task == TaskKind::regression) {
        d.labels.resize(n);
        for (std::size_t i = 0; i < n; ++i) d.labels[i] = std::clamp(score[i], -3.0, 3.0);
    } else {
        // Equal-probability bins over the empirical score distribution.
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
        d.labels.assign(n, 0.0);
        for (std::size_t rank = 0; rank < n; ++rank) {
            d.labels[order[rank]] = static_cast<double>(rank * cfg.num_classes / n);
        }
    }
    return out;
}

Dataset generate_synthetic(const SynthConfig& config, bool shifted) {
    return generate_synthetic_detail(config, shifted).data;
}

Dataset inject_gaussian_noise(const Dataset& data, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
    Dataset out = data;
    if (sigma == 0.0) return out;
    Rng rng(mix_seed(seed, 0x6e6f697365ULL));
    std::normal_distribution<double> n(0.0, sigma);
    for (Matrix& x : out.features)
        for (double& v : x.data()) v += n(rng);
    std::ostringstream os;
    os << out.provenance << ":noise(sigma=" << sigma << ",seed=" << seed << ")";
    out.provenance = os.str();
    return out;
}

SplitPlan kfold_split(std::size_t n, std::size_t k, std::uint64_t seed, double test_fraction) {
    if (k < 2) throw ConfigError("kfold: k must be at least 2");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("kfold: test fraction must lie in [0, 1)");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, 0x73706c6974ULL));
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    const std::size_t n_train = n - n_test;
    if (k > n_train) {
        std::ostringstream os;
        os << "kfold: k = " << k << " exceeds the " << n_train << " non-test samples";
        throw ConfigError(os.str());
    }
    SplitPlan plan;
    plan.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::sort(plan.test.begin(), plan.test.end());
    const std::vector<std::size_t> pool(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::size_t begin = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = n_train / k + (f < n_train % k ? 1 : 0);
        FoldIndices fold;
        for (std::size_t i = 0; i < n_train; ++i) {
            (i >= begin && i < begin + len ? fold.validation : fold.train).push_back(pool[i]);
        }
        begin += len;
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

namespace {

void put_f64(std::ostream& os, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    os.write(buf, 8);
}

double get_f64(const char* p) {
    std::uint64_t bits;
    std::memcpy(&bits, p, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_feature_file(const Dataset& data, const std::filesystem::path& path) {
    data.validate();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open '" + path.string() + "' for writing");
    const auto dims = data.input_dims();
    os << "GCLv1 " << data.size() << ' ' << dims[0] << ' ' << dims[1] << ' ' << dims[2] << ' ' << task_name(data.task)
       << ' ' << (data.task == TaskKind::classification ? data.num_classes : 0) << '\n';
    for (const Matrix& x : data.features)
        for (double v : x.data()) put_f64(os, v);
    for (double y : data.labels) put_f64(os, y);
    if (!os) throw FormatError("write to '" + path.string() + "' failed");
}

Dataset load_feature_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open '" + path.string() + "'");
    std::string header;
    if (!std::getline(is, header)) throw FormatError(path.string() + ": missing header line");
    std::istringstream hs(header);
    std::string magic, task;
    long long n = -1, dl = -1, da = -1, dv = -1, classes = -1;
    hs >> magic >> n >> dl >> da >> dv >> task >> classes;
    std::string extra;
    if (!hs || magic != "GCLv1" || n < 0 || dl <= 0 || da <= 0 || dv <= 0 || classes < 0 || (hs >> extra)) {
        throw FormatError(path.string() + ": line 1: malformed header '" + header + "'");
    }
    Dataset d;
    try {
        d.task = task_from_name(task);
    } catch (const ConfigError&) {
        throw FormatError(path.string() + ": line 1: unknown task '" + task + "'");
    }
    if (d.task == TaskKind::classification && classes < 2) {
        throw FormatError(path.string() + ": line 1: classification needs C >= 2");
    }
    d.num_classes = d.task == TaskKind::classification ? static_cast<std::size_t>(classes) : 0;
    const std::size_t rows = static_cast<std::size_t>(n);
    const std::array<std::size_t, kNumModalities> dims{static_cast<std::size_t>(dl), static_cast<std::size_t>(da),
                                                       static_cast<std::size_t>(dv)};
    const std::size_t count = rows * (dims[0] + dims[1] + dims[2] + 1);
    const std::size_t header_bytes = header.size() + 1;
    std::string payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (payload.size() != count * 8) {
        std::ostringstream os;
        os << path.string() << ": payload length mismatch: expected " << count * 8 << " bytes (" << count
           << " float64 values), found " << payload.size() << " bytes";
        throw FormatError(os.str());
    }
    std::size_t offset = 0;
    auto next = [&](const char* what, std::size_t row) {
        const double v = get_f64(payload.data() + offset);
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << path.string() << ": non-finite value at byte offset " << header_bytes + offset << " (" << what
               << ", row " << row << ")";
            throw FormatError(os.str());
        }
        offset += 8;
        return v;
    };
    for (Modality m : kAllModalities) {
        Matrix x(rows, dims[index(m)]);
        const std::string what = std::string("modality ") + modality_tag(m);
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = next(what.c_str(), k / dims[index(m)]);
        d.features[index(m)] = std::move(x);
    }
    d.labels.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) d.labels[i] = next("labels", i);
    d.provenance = "file:" + path.filename().string();
    try {
        d.validate();
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return d;
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

}  // namespace gcl
