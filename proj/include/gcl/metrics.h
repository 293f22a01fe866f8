#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gcl/tensor.h"

namespace gcl {

// Undefined values (zero variance, empty denominators) are std::nullopt and
// are reported as flagged missing values, never as zero.
using MaybeReal = std::optional<double>;

struct RegressionMetrics {
    double mae = 0.0;
    MaybeReal corr;
    MaybeReal acc2;
    double acc7 = 0.0;
    MaybeReal f1;  // macro F1 of the Acc-2 decisions (negative / positive)
};

struct ClassificationMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

MaybeReal pearson(std::span<const double> x, std::span<const double> y);

// MAE, Pearson r, Acc-2 over samples with y != 0 (sign agreement), Acc-7 with
// round(clamp(., -3, 3)), and the macro F1 of the two-class decision.
// Throws for mismatched or empty inputs.
RegressionMetrics regression_metrics(std::span<const double> pred, std::span<const double> y);

// Argmax decisions; precision/recall/F1 macro-averaged over the classes
// present in y (per-class F1 = 0 when P + R = 0).
ClassificationMetrics classification_metrics(const Matrix& logits, std::span<const double> y);

struct GovernanceRates {
    double activation_rate = 0.0;
    MaybeReal positive_gain_ratio;
};

// AR = share of (route, sample) pairs with alpha > theta; PGR = share of those
// pairs with Delta > 0.
GovernanceRates governance_rates(std::span<const double> gates, std::span<const double> gains, double theta = 0.1);

// Linear-kernel HSIC: trace(K H L H) / (N - 1)^2 with K = A A^T, L = B B^T.
double hsic_linear(const Matrix& a, const Matrix& b);

struct CouplingDiagnostics {
    double hsic = 0.0;
    MaybeReal cka;
};

// Throws for N < 4 or mismatched row counts.
CouplingDiagnostics coupling_diagnostics(const Matrix& a, const Matrix& b);

struct ConsensusDiagnostics {
    MaybeReal dominance_index;
    MaybeReal alignment_corr;
};

// D = 1 - H(mean pi) / ln |M|; alignment = Pearson correlation pooled over
// (sample, modality) pairs between pi and the marginal utilities.
// `weights` and `utilities` are [N x |M|]. D is missing when |M| < 2.
ConsensusDiagnostics consensus_diagnostics(const Matrix& weights, const Matrix& utilities);

}  // namespace gcl
