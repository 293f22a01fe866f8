#include "gcl/stage1.h"

#include <sstream>

#include "gcl/errors.h"

namespace gcl {

Tensor Stage1Output::channel(Modality m) const {
    if (!z[index(m)]) throw ShapeError(std::string("stage1: channel '") + modality_tag(m) + "' is not active");
    return *z[index(m)];
}

SelectiveInteraction::SelectiveInteraction(ParameterStore& store, const Stage1Config& config, ModalitySet set,
                                           const std::array<std::size_t, kNumModalities>& latent_dims, Rng& rng)
    : config_(config), set_(set) {
    if (!(config.kappa > 0.0)) throw ConfigError("stage1.kappa must be positive");
    if (!(config.tau_red > 0.0)) throw ConfigError("stage1.tau_red must be positive");
    if (config.message_dim == 0) throw ConfigError("stage1.message_dim must be positive");
    std::size_t context = 0;
    for (Modality m : set.members()) {
        if (config.message_dim >= latent_dims[index(m)]) {
            std::ostringstream os;
            os << "stage1.message_dim " << config.message_dim << " must be below d_" << modality_tag(m) << " = "
               << latent_dims[index(m)];
            throw ConfigError(os.str());
        }
        context += latent_dims[index(m)];
    }
    const std::size_t du = config.message_dim, hid = config.hidden;
    for (Route r : directed_routes(set)) {
        const std::size_t dm = latent_dims[index(r.from)], dn = latent_dims[index(r.to)];
        const std::string base = "stage1." + r.name();
        RouteAgents a{
            Mlp(store, base + ".proposer", MlpSpec{{context, hid, 1}}, rng),
            Mlp(store, base + ".mapper", MlpSpec{{dm, du}}, rng),
            Mlp(store, base + ".fuser", MlpSpec{{dn + du, hid, dn}}, rng),
            Mlp(store, base + ".gain_predictor", MlpSpec{{dn + du, hid, 1}}, rng),
        };
        agents_.emplace(r, std::move(a));
    }
}

const SelectiveInteraction::RouteAgents& SelectiveInteraction::agents(Route r) const {
    auto it = agents_.find(r);
    if (it == agents_.end()) throw ShapeError("stage1: no agents for route " + r.name());
    return it->second;
}

SelectiveInteraction::RouteAgents& SelectiveInteraction::agents(Route r) {
    auto it = agents_.find(r);
    if (it == agents_.end()) throw ShapeError("stage1: no agents for route " + r.name());
    return it->second;
}

Tensor SelectiveInteraction::propose_route(Tape& tape, const ModalityBundle& bundle, Route r) const {
    std::vector<Tensor> parts;
    for (Modality m : set_.members()) parts.push_back(bundle.at(m));
    return agents(r).proposer.forward(tape, concat_cols(parts));
}

Tensor SelectiveInteraction::make_message(Tape& tape, Tensor h_from, Route r) const {
    return agents(r).mapper.forward(tape, h_from);
}

Tensor SelectiveInteraction::fuse(Tape& tape, Tensor h_to, Tensor message, Route r) const {
    return agents(r).fuser.forward(tape, concat_cols({h_to, message}));
}

Tensor SelectiveInteraction::tentative_update(Tape& tape, Tensor h_to, Tensor message, Route r) const {
    return add(h_to, fuse(tape, h_to, message, r));
}

Tensor SelectiveInteraction::predict_gain(Tape& tape, Tensor h_to, Tensor message, Route r) const {
    return agents(r).gain_predictor.forward(tape, concat_cols({h_to, message}));
}

Stage1Output SelectiveInteraction::forward(Tape& tape, const ModalityBundle& bundle, const LocalHeads& heads,
                                           const Targets* targets, const Stage1Options& options) const {
    if (options.mode == GainMode::teacher && targets == nullptr) {
        throw std::invalid_argument("stage1: teacher gains need labels; use predicted mode for inference");
    }
    Stage1Output out;
    for (Modality to : set_.members()) {
        const Tensor h_to = bundle.at(to);
        std::vector<RouteRecord> incoming;
        std::vector<Tensor> logits, gains;
        for (Modality from : set_.members()) {
            if (from == to) continue;
            const Route r{from, to};
            RouteRecord rec;
            rec.route = r;
            rec.rho = propose_route(tape, bundle, r);
            rec.message = make_message(tape, bundle.at(from), r);
            if (auto p = options.message_permutations.find(r); p != options.message_permutations.end()) {
                rec.message = gather_rows(rec.message, p->second);
            }
            rec.fused = fuse(tape, h_to, rec.message, r);
            rec.tentative = add(h_to, rec.fused);
            if (targets != nullptr) rec.teacher_gain = teacher_gain(tape, heads, to, h_to, rec.tentative, *targets);
            if (options.mode == GainMode::teacher) {
                // The predictor only regresses onto the teacher gain here.
                rec.predicted_gain = predict_gain(tape, stop_gradient(h_to), stop_gradient(rec.message), r);
                gains.push_back(stop_gradient(*rec.teacher_gain));
            } else {
                rec.predicted_gain = predict_gain(tape, h_to, rec.message, r);
                gains.push_back(rec.predicted_gain);
            }
            if (auto g = options.gate_gains.find(r); g != options.gate_gains.end()) {
                gains.back() = tape.constant(g->second);
            }
            logits.push_back(rec.rho);
            incoming.push_back(std::move(rec));
        }
        std::vector<Tensor> fused;
        std::vector<Tensor> gates;
        if (!incoming.empty()) {
            GateFactors f = admission_gates(logits, gains, config_.kappa, options.policy);
            for (std::size_t i = 0; i < incoming.size(); ++i) {
                RouteRecord& rec = incoming[i];
                rec.routing_factor = f.routing[i];
                rec.gate = f.gates[i];
                if (auto g = options.forced_gates.find(rec.route); g != options.forced_gates.end()) {
                    rec.gate = tape.constant(Matrix(h_to.rows(), 1, g->second));
                }
                fused.push_back(rec.fused);
                gates.push_back(rec.gate);
            }
        }
        out.z[index(to)] = gated_integration(h_to, gates, fused);
        for (auto& rec : incoming) out.routes.push_back(std::move(rec));
    }
    return out;
}

Tensor teacher_gain(Tape& tape, const LocalHeads& heads, Modality receiver, Tensor h_to, Tensor tentative,
                    const Targets& targets) {
    Tensor before = per_sample_loss(heads.predict(tape, h_to, receiver), targets);
    Tensor after = per_sample_loss(heads.predict(tape, tentative, receiver), targets);
    return sub(before, after);
}

GateFactors admission_gates(std::span<const Tensor> logits, std::span<const Tensor> gains, double kappa,
                            GatePolicy policy) {
    if (!(kappa > 0.0)) throw ConfigError("admission gate: kappa must be positive");
    if (logits.empty() || logits.size() != gains.size()) {
        throw ShapeError("admission gate: need one gain per sender logit");
    }
    Tape& tape = logits.front().tape();
    const std::size_t batch = logits.front().rows();
    const std::size_t senders = logits.size();
    GateFactors out;
    if (policy == GatePolicy::uniform_routing || policy == GatePolicy::full_exchange) {
        for (std::size_t i = 0; i < senders; ++i) {
            out.routing.push_back(tape.constant(Matrix(batch, 1, 1.0 / static_cast<double>(senders))));
        }
    } else {
        Tensor soft = softmax_rows(concat_cols(logits));
        for (std::size_t i = 0; i < senders; ++i) out.routing.push_back(slice_cols(soft, i, i + 1));
    }
    for (std::size_t i = 0; i < senders; ++i) {
        switch (policy) {
            case GatePolicy::full_exchange:
                out.gates.push_back(tape.constant(Matrix(batch, 1, 1.0)));
                break;
            case GatePolicy::no_audit:
                out.gates.push_back(out.routing[i]);
                break;
            case GatePolicy::governed:
            case GatePolicy::uniform_routing:
                out.gates.push_back(mul(out.routing[i], sigmoid(scale(gains[i], 1.0 / kappa))));
                break;
        }
    }
    return out;
}

Tensor gated_integration(Tensor h_to, std::span<const Tensor> gates, std::span<const Tensor> fused) {
    if (gates.size() != fused.size()) throw ShapeError("gated integration: one gate per fused message required");
    if (gates.empty()) return h_to;
    Tensor acc = mul(gates[0], fused[0]);
    for (std::size_t i = 1; i < gates.size(); ++i) acc = add(acc, mul(gates[i], fused[i]));
    return add(h_to, acc);
}

namespace {

Tensor normalize_rows(Tensor x) {
    return div(x, sqrt(add_scalar(sum_cols(square(x)), 1e-12)));
}

// Mean over rows of -log softmax(logits)_ii.
Tensor info_nce(Tensor logits) {
    const std::size_t n = logits.rows();
    Matrix eye(n, n);
    for (std::size_t i = 0; i < n; ++i) eye(i, i) = 1.0;
    Tensor diag = sum_cols(mul(logits.tape().constant(std::move(eye)), log_softmax_rows(logits)));
    return neg(mean(diag));
}

}  // namespace

Tensor alignment_score(Tensor a, Tensor b, double tau) {
    if (a.rows() < 2) throw ShapeError("redundancy score: contrastive term needs batch >= 2");
    if (a.shape() != b.shape()) {
        throw ShapeError("redundancy score: shape mismatch " + shape_string(a.value()) + " vs " + shape_string(b.value()));
    }
    if (!(tau > 0.0)) throw ConfigError("redundancy score: tau must be positive");
    Tensor sim = scale(matmul(normalize_rows(a), transpose(normalize_rows(b))), 1.0 / tau);
    return scale(add(info_nce(sim), info_nce(transpose(sim))), -0.5);
}

Tensor redundancy_loss(Tape& tape, std::span<const Tensor> channels, double tau) {
    std::optional<Tensor> total;
    for (std::size_t i = 0; i < channels.size(); ++i) {
        for (std::size_t j = i + 1; j < channels.size(); ++j) {
            Tensor d = alignment_score(channels[i], channels[j], tau);
            total = total ? add(*total, d) : d;
        }
    }
    return total ? *total : tape.constant(Matrix(1, 1, 0.0));
}

Tensor gain_alignment_loss(Tape& tape, std::span<const RouteRecord> routes) {
    std::optional<Tensor> total;
    for (const RouteRecord& r : routes) {
        if (!r.teacher_gain) throw std::invalid_argument("gain alignment loss: route " + r.route.name() + " has no teacher gain");
        Tensor term = mean(mul(r.gate, stop_gradient(*r.teacher_gain)));
        total = total ? add(*total, term) : term;
    }
    return total ? neg(*total) : tape.constant(Matrix(1, 1, 0.0));
}

Tensor gain_predictor_loss(Tape& tape, std::span<const RouteRecord> routes) {
    std::optional<Tensor> total;
    for (const RouteRecord& r : routes) {
        if (!r.teacher_gain) throw std::invalid_argument("gain predictor loss: route " + r.route.name() + " has no teacher gain");
        Tensor term = mean(square(sub(r.predicted_gain, stop_gradient(*r.teacher_gain))));
        total = total ? add(*total, term) : term;
    }
    return total ? *total : tape.constant(Matrix(1, 1, 0.0));
}

}  // namespace gcl
