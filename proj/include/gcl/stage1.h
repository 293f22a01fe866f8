#pragma once

// Selective interaction: routing agent (route logits, bottlenecked messages)
// and auditing agent (teacher gain, gain predictor, admission gates, gated
// residual integration), plus the redundancy and gain-alignment regularisers.

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "gcl/networks.h"

namespace gcl {

struct Stage1Config {
    std::size_t message_dim = 8;  // d_u, must be below every d_m
    double kappa = 1.0;           // gate temperature: sigmoid(gain / kappa)
    double tau_red = 0.5;         // contrastive temperature of the redundancy score
    std::size_t hidden = 16;      // hidden width of proposer, fuser and gain predictor
};

// Which gain feeds the sigmoid factor of the gate.
enum class GainMode { teacher, predicted };

// Gate substitutions used by the ablations.
enum class GatePolicy {
    governed,         // softmax(rho) * sigmoid(gain / kappa)
    uniform_routing,  // softmax factor -> 1 / (senders)
    no_audit,         // sigmoid factor -> 1
    full_exchange,    // gate -> 1
};

struct RouteRecord {
    Route route;
    Tensor rho;                          // [B x 1]
    Tensor message;                      // u, [B x d_u]
    Tensor fused;                        // phi(h^n, u), [B x d_n]
    Tensor tentative;                    // h^n + phi, [B x d_n]
    std::optional<Tensor> teacher_gain;  // Delta, [B x 1]; needs labels
    Tensor predicted_gain;               // Delta-hat, [B x 1]
    Tensor routing_factor;               // softmax over senders, [B x 1]
    Tensor gate;                         // alpha, [B x 1]
};

struct Stage1Options {
    GainMode mode = GainMode::teacher;
    GatePolicy policy = GatePolicy::governed;
    // Replaces alpha by a constant for the listed routes.
    std::map<Route, double> forced_gates;
    // Row permutation applied to a route's message before it is consumed.
    std::map<Route, std::vector<std::size_t>> message_permutations;
    // Constant gain fed to the gate of the listed routes instead of the mode's gain.
    std::map<Route, Matrix> gate_gains;
};

struct Stage1Output {
    std::array<std::optional<Tensor>, kNumModalities> z;
    std::vector<RouteRecord> routes;

    Tensor channel(Modality m) const;
};

class SelectiveInteraction {
   public:
    SelectiveInteraction() = default;
    // Throws ConfigError when message_dim >= some latent dim, or kappa/tau_red <= 0.
    SelectiveInteraction(ParameterStore& store, const Stage1Config& config, ModalitySet set,
                         const std::array<std::size_t, kNumModalities>& latent_dims, Rng& rng);

    // rho^{m->n} from the concatenation of all active h, [B x 1].
    Tensor propose_route(Tape& tape, const ModalityBundle& bundle, Route r) const;
    // u^{m->n} = psi(h^m), affine, [B x d_u].
    Tensor make_message(Tape& tape, Tensor h_from, Route r) const;
    // phi^{m->n}(concat(h^n, u)), [B x d_n].
    Tensor fuse(Tape& tape, Tensor h_to, Tensor message, Route r) const;
    Tensor tentative_update(Tape& tape, Tensor h_to, Tensor message, Route r) const;
    // Delta-hat = g_g(concat(h^n, u)), [B x 1].
    Tensor predict_gain(Tape& tape, Tensor h_to, Tensor message, Route r) const;

    // Teacher mode needs targets; predicted mode records teacher gains too
    // when targets are supplied (diagnostics only).
    Stage1Output forward(Tape& tape, const ModalityBundle& bundle, const LocalHeads& heads, const Targets* targets,
                         const Stage1Options& options) const;

    struct RouteAgents {
        Mlp proposer;
        Mlp mapper;
        Mlp fuser;
        Mlp gain_predictor;
    };
    const RouteAgents& agents(Route r) const;
    RouteAgents& agents(Route r);
    const Stage1Config& config() const { return config_; }
    ModalitySet modalities() const { return set_; }

   private:
    Stage1Config config_;
    ModalitySet set_;
    std::map<Route, RouteAgents> agents_;
};

// Delta^{m->n} = l(q_n(h^n), y) - l(q_n(h~^n), y) per sample, [B x 1].
Tensor teacher_gain(Tape& tape, const LocalHeads& heads, Modality receiver, Tensor h_to, Tensor tentative,
                    const Targets& targets);

struct GateFactors {
    std::vector<Tensor> routing;  // per sender, [B x 1]
    std::vector<Tensor> gates;    // per sender, [B x 1]
};

// Gates for all senders into one receiver: softmax over the senders' logits
// times sigmoid(gain / kappa), with the policy's substitutions applied.
GateFactors admission_gates(std::span<const Tensor> logits, std::span<const Tensor> gains, double kappa,
                            GatePolicy policy = GatePolicy::governed);

// z^n = h^n + sum_m alpha^{m->n} * phi^{m->n}.
Tensor gated_integration(Tensor h_to, std::span<const Tensor> gates, std::span<const Tensor> fused);

// D(a, b) = -(NCE(a->b) + NCE(b->a)) / 2 with cosine-similarity logits / tau.
// Throws ShapeError for batch < 2.
Tensor alignment_score(Tensor a, Tensor b, double tau);

// Sum of D over unordered channel pairs; zero for fewer than two channels.
Tensor redundancy_loss(Tape& tape, std::span<const Tensor> channels, double tau);

// -sum_routes mean_batch(alpha * stop_gradient(Delta)). Requires teacher gains.
Tensor gain_alignment_loss(Tape& tape, std::span<const RouteRecord> routes);

// sum_routes mean_batch((Delta-hat - stop_gradient(Delta))^2).
Tensor gain_predictor_loss(Tape& tape, std::span<const RouteRecord> routes);

}  // namespace gcl
