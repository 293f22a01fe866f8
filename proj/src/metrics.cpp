#include "gcl/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "gcl/errors.h"

namespace gcl {

MaybeReal pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ShapeError("pearson: length mismatch");
    const std::size_t n = x.size();
    if (n < 2) return std::nullopt;
    const auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
    };
    if (constant(x) || constant(y)) return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

// Macro precision / recall / F1 over the classes present in `truth`.
ClassificationMetrics macro_scores(std::span<const long> decided, std::span<const long> truth) {
    ClassificationMetrics out;
    const std::set<long> present(truth.begin(), truth.end());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += decided[i] == truth[i] ? 1 : 0;
    out.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
    for (long c : present) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const bool p = decided[i] == c, t = truth[i] == c;
            tp += (p && t) ? 1 : 0;
            fp += (p && !t) ? 1 : 0;
            fn += (!p && t) ? 1 : 0;
        }
        const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        out.precision += prec;
        out.recall += rec;
        out.f1 += prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    }
    if (!present.empty()) {
        const auto k = static_cast<double>(present.size());
        out.precision /= k;
        out.recall /= k;
        out.f1 /= k;
    }
    return out;
}

}  // namespace

RegressionMetrics regression_metrics(std::span<const double> pred, std::span<const double> y) {
    if (pred.size() != y.size()) throw ShapeError("regression metrics: length mismatch");
    if (pred.empty()) throw ShapeError("regression metrics: no samples");
    RegressionMetrics out;
    const auto n = static_cast<double>(pred.size());
    std::size_t hits7 = 0;
    std::vector<long> decided, truth;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        out.mae += std::abs(pred[i] - y[i]);
        hits7 += std::round(std::clamp(pred[i], -3.0, 3.0)) == std::round(std::clamp(y[i], -3.0, 3.0)) ? 1 : 0;
        if (y[i] != 0.0) {
            truth.push_back(y[i] > 0.0 ? 1 : 0);
            decided.push_back(pred[i] > 0.0 ? 1 : 0);
        }
    }
    out.mae /= n;
    out.acc7 = static_cast<double>(hits7) / n;
    out.corr = pearson(pred, y);
    if (!truth.empty()) {
        const ClassificationMetrics c = macro_scores(decided, truth);
        out.acc2 = c.accuracy;
        out.f1 = c.f1;
    }
    return out;
}

ClassificationMetrics classification_metrics(const Matrix& logits, std::span<const double> y) {
    if (logits.cols() < 2) throw ShapeError("classification metrics: need at least 2 classes");
    if (logits.rows() != y.size()) throw ShapeError("classification metrics: length mismatch");
    std::vector<long> decided(y.size()), truth(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols(); ++c)
            if (logits(i, c) > logits(i, best)) best = c;
        decided[i] = static_cast<long>(best);
        truth[i] = static_cast<long>(y[i]);
    }
    return macro_scores(decided, truth);
}

GovernanceRates governance_rates(std::span<const double> gates, std::span<const double> gains, double theta) {
    if (gates.size() != gains.size()) throw ShapeError("governance rates: one gain per gate required");
    GovernanceRates out;
    if (gates.empty()) return out;
    std::size_t active = 0, positive = 0;
    for (std::size_t i = 0; i < gates.size(); ++i) {
        if (gates[i] > theta) {
            ++active;
            positive += gains[i] > 0.0 ? 1 : 0;
        }
    }
    out.activation_rate = static_cast<double>(active) / static_cast<double>(gates.size());
    if (active > 0) out.positive_gain_ratio = static_cast<double>(positive) / static_cast<double>(active);
    return out;
}

namespace {

// Column-centred copy; exactly constant columns become exactly zero.
Matrix center_columns(const Matrix& x) {
    Matrix out = x;
    const std::size_t n = x.rows();
    for (std::size_t c = 0; c < x.cols(); ++c) {
        bool constant = true;
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            mean += x(r, c);
            constant = constant && x(r, c) == x(0, c);
        }
        mean /= static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) out(r, c) = constant ? 0.0 : x(r, c) - mean;
    }
    return out;
}

}  // namespace

double hsic_linear(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ShapeError("hsic: row count mismatch " + shape_string(a) + " vs " + shape_string(b));
    if (a.rows() < 2) throw ShapeError("hsic: need at least 2 samples");
    // trace(K H L H) = || (H A)^T (H B) ||_F^2.
    const Matrix ca = center_columns(a), cb = center_columns(b);
    double total = 0.0;
    for (std::size_t i = 0; i < a.cols(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < a.rows(); ++r) s += ca(r, i) * cb(r, j);
            total += s * s;
        }
    }
    const double nm1 = static_cast<double>(a.rows() - 1);
    return total / (nm1 * nm1);
}

CouplingDiagnostics coupling_diagnostics(const Matrix& a, const Matrix& b) {
    if (a.rows() < 4) throw ShapeError("coupling diagnostics: need N >= 4");
    CouplingDiagnostics out;
    out.hsic = hsic_linear(a, b);
    const double aa = hsic_linear(a, a), bb = hsic_linear(b, b);
    if (aa > 0.0 && bb > 0.0) out.cka = std::clamp(out.hsic / std::sqrt(aa * bb), 0.0, 1.0);
    return out;
}

ConsensusDiagnostics consensus_diagnostics(const Matrix& weights, const Matrix& utilities) {
    if (weights.shape() != utilities.shape()) throw ShapeError("consensus diagnostics: weights/utilities shape mismatch");
    if (weights.rows() == 0) throw ShapeError("consensus diagnostics: no samples");
    ConsensusDiagnostics out;
    const std::size_t k = weights.cols();
    if (k >= 2) {
        double h = 0.0;
        for (std::size_t m = 0; m < k; ++m) {
            double p = 0.0;
            for (std::size_t i = 0; i < weights.rows(); ++i) p += weights(i, m);
            p /= static_cast<double>(weights.rows());
            if (p > 0.0) h -= p * std::log(p);
        }
        out.dominance_index = std::clamp(1.0 - h / std::log(static_cast<double>(k)), 0.0, 1.0);
    }
    out.alignment_corr = pearson(weights.data(), utilities.data());
    return out;
}

}  // namespace gcl
