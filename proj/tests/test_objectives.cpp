#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "gcl/errors.h"
#include "gcl/gradcheck.h"
#include "gcl/model.h"
#include "support/fixtures.h"

using namespace gcl;
using namespace gcl::testing;

namespace {

using TermFn = std::function<Tensor(const LossTerms&, Tape&)>;

std::vector<Matrix> grads_of(GclModel& model, const Batch& batch, const TermFn& pick) {
    model.parameters().zero_grad();
    Tape t;
    const auto fr = model.forward(t, batch.x, &batch.y);
    t.backward(pick(model.loss_terms(t, fr, batch.y), t));
    std::vector<Matrix> g;
    for (auto& p : model.parameters()) g.push_back(p.grad);
    return g;
}

}  // namespace

TEST(TaskLoss, HandValues) {
    Tape t;
    const auto y = Targets::regression(std::vector<double>{2.0});
    EXPECT_EQ(task_loss(t.constant(Matrix(1, 1, 2.0)), y).item(), 0.0);
    EXPECT_EQ(task_loss(t.constant(Matrix(1, 1, 0.0)), y).item(), 4.0);
    const auto c = Targets::classification(std::vector<double>{2.0, 0.0}, 4);
    EXPECT_NEAR(task_loss(t.constant(Matrix(2, 4, 0.3)), c).item(), std::log(4.0), 1e-15);
}

TEST(TaskLoss, OutOfRangeLabelRejected) {
    EXPECT_THROW(Targets::classification(std::vector<double>{4.0}, 4), ConfigError);
    EXPECT_THROW(Targets::classification(std::vector<double>{-1.0}, 4), ConfigError);
    EXPECT_THROW(Targets::classification(std::vector<double>{1.5}, 4), ConfigError);
}

TEST(TaskLoss, ShapeMismatchRejected) {
    Tape t;
    EXPECT_THROW(task_loss(t.constant(Matrix(2, 1)), Targets::regression(std::vector<double>{1.0})), ShapeError);
}

TEST(LocalLoss, PerfectHeadsGiveZero) {
    ParameterStore s;
    Rng rng(1);
    LocalHeads heads(s, ModalitySet::all(), {1, 1, 1}, 0, 1, rng);
    for (Modality m : kAllModalities) {
        heads.head(m).weight(0).value(0, 0) = 1.0;
        heads.head(m).bias(0).value(0, 0) = 0.0;
    }
    const std::vector<double> y{0.5, -1.0};
    Tape t;
    ModalityBundle b;
    for (Modality m : kAllModalities) b.h[index(m)] = t.constant(Matrix::column(y));
    EXPECT_EQ(local_loss(t, b, heads, ModalitySet::all(), Targets::regression(y)).item(), 0.0);
}

TEST(LocalLoss, SumOfUnimodalLosses) {
    const auto cfg = tiny_config();
    GclModel model(cfg, 3);
    const auto batch = make_batch(cfg, 5, 4);
    Tape t;
    const auto fr = model.forward(t, batch.x, &batch.y);
    const double loc = local_loss(t, fr.bundle, model.local_heads(), cfg.modalities, batch.y).item();
    double ref = 0.0;
    for (Modality m : kAllModalities) {
        const Matrix p = model.local_heads().predict(t, fr.bundle.at(m), m).value();
        double s = 0.0;
        for (std::size_t i = 0; i < 5; ++i) s += (p(i, 0) - batch.y.labels[i]) * (p(i, 0) - batch.y.labels[i]);
        ref += s / 5.0;
    }
    EXPECT_NEAR(loc, ref, 1e-12);
}

TEST(LocalLoss, NoGradientIntoInteractionParameters) {
    const auto cfg = tiny_config();
    GclModel model(cfg, 5);
    const auto batch = make_batch(cfg, 4, 6);
    const auto g = grads_of(model, batch, [](const LossTerms& l, Tape&) { return l.loc; });
    std::size_t i = 0;
    for (auto& p : model.parameters()) {
        if (p.name.rfind("stage1.", 0) == 0 || p.name.rfind("stage2.", 0) == 0) {
            for (double v : g[i].values()) EXPECT_EQ(v, 0.0) << p.name;
        }
        ++i;
    }
}

TEST(PublicLoss, BatchOfTwoHandValue) {
    Tape t;
    const auto y = Targets::regression(std::vector<double>{1.0, -2.0});
    const double v = public_loss(t.constant(Matrix::from_rows({{1.5}, {0.0}})), y).item();
    EXPECT_DOUBLE_EQ(v, (0.25 + 4.0) / 2.0);
    EXPECT_EQ(public_loss(t.constant(Matrix::from_rows({{1.0}, {-2.0}})), y).item(), 0.0);
}

TEST(TotalLoss, ZeroWeightsGiveTaskLoss) {
    const auto cfg = tiny_config();
    GclModel model(cfg, 7);
    const auto batch = make_batch(cfg, 6, 8);
    Tape t;
    const auto terms = model.loss_terms(t, model.forward(t, batch.x, &batch.y), batch.y);
    const auto obj = total_loss(terms, LossWeights{0, 0, 0, 0, 0});
    EXPECT_EQ(obj.total.item(), terms.task.item());
    EXPECT_EQ(obj.report.total, obj.report.task);
}

TEST(TotalLoss, RecomposesFromTerms) {
    const auto cfg = tiny_config();
    GclModel model(cfg, 9);
    const auto batch = make_batch(cfg, 6, 10);
    Tape t;
    const auto terms = model.loss_terms(t, model.forward(t, batch.x, &batch.y), batch.y);
    for (const LossWeights w : {LossWeights{1, 1, 1, 1, 1}, LossWeights{}}) {
        const auto obj = total_loss(terms, w);
        const double ref = terms.task.item() + w.loc * terms.loc.item() + w.pub * terms.pub->item() +
                           w.gain * terms.gain.item() + w.red * terms.red.item() + w.gpred * terms.gpred.item();
        EXPECT_NEAR(obj.total.item(), ref, 1e-12);
        EXPECT_NEAR(obj.report.total, ref, 1e-12);
        EXPECT_EQ(obj.report.pub, terms.pub->item());
    }
}

TEST(TotalLoss, ZeroPublicWeightDropsTermBitwise) {
    const auto cfg = tiny_config();
    GclModel model(cfg, 11);
    const auto batch = make_batch(cfg, 6, 12);
    Tape t;
    auto terms = model.loss_terms(t, model.forward(t, batch.x, &batch.y), batch.y);
    LossWeights w;
    w.pub = 0.0;
    const double with = total_loss(terms, w).total.item();
    terms.pub.reset();
    EXPECT_EQ(with, total_loss(terms, w).total.item());
}

TEST(TotalLoss, NonFiniteTermIsNamed) {
    Tape t;
    LossTerms terms;
    terms.task = t.constant(Matrix(1, 1, 1.0));
    terms.loc = t.constant(Matrix(1, 1, 1.0));
    terms.gain = t.constant(Matrix(1, 1, 1.0));
    terms.red = t.constant(Matrix(1, 1, std::nan("")));
    terms.gpred = t.constant(Matrix(1, 1, 1.0));
    try {
        total_loss(terms, LossWeights{});
        FAIL();
    } catch (const NonFiniteError& e) {
        EXPECT_NE(std::string(e.what()).find("red"), std::string::npos);
    }
}

TEST(TotalLoss, GradientIsLinearInTerms) {
    const auto cfg = tiny_config();
    GclModel model(cfg, 13);
    const auto batch = make_batch(cfg, 6, 14);
    const LossWeights w{0.7, 0.4, 0.2, 0.3, 0.9};
    const auto total = grads_of(model, batch, [&](const LossTerms& l, Tape&) { return total_loss(l, w).total; });
    const std::vector<std::pair<double, TermFn>> parts{
        {1.0, [](const LossTerms& l, Tape&) { return l.task; }},
        {w.loc, [](const LossTerms& l, Tape&) { return l.loc; }},
        {w.pub, [](const LossTerms& l, Tape&) { return *l.pub; }},
        {w.gain, [](const LossTerms& l, Tape&) { return l.gain; }},
        {w.red, [](const LossTerms& l, Tape&) { return l.red; }},
        {w.gpred, [](const LossTerms& l, Tape&) { return l.gpred; }},
    };
    std::vector<Matrix> acc;
    for (const auto& [lambda, pick] : parts) {
        const auto g = grads_of(model, batch, pick);
        if (acc.empty()) {
            acc = std::vector<Matrix>(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) acc[i] = Matrix(g[i].rows(), g[i].cols());
        }
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t j = 0; j < g[i].size(); ++j) acc[i][j] += lambda * g[i][j];
    }
    for (std::size_t i = 0; i < acc.size(); ++i)
        for (std::size_t j = 0; j < acc[i].size(); ++j) EXPECT_NEAR(total[i][j], acc[i][j], 1e-10);
}

TEST(TotalLoss, ZeroWeightTermsLeaveTheirParametersUntouched) {
    const auto cfg = tiny_config();
    GclModel model(cfg, 15);
    const auto batch = make_batch(cfg, 6, 16);
    LossWeights w;
    w.pub = 0.0;
    w.gpred = 0.0;
    const auto g = grads_of(model, batch, [&](const LossTerms& l, Tape&) { return total_loss(l, w).total; });
    std::size_t i = 0, checked = 0;
    for (auto& p : model.parameters()) {
        const bool pub_only = p.name.rfind("stage2.public_head", 0) == 0;
        const bool gpred_only = p.name.find("gain_predictor") != std::string::npos;
        if (pub_only || gpred_only) {
            for (double v : g[i].values()) EXPECT_EQ(v, 0.0) << p.name;
            ++checked;
        }
        ++i;
    }
    EXPECT_GT(checked, 0u);
}

class TermGradients : public ::testing::TestWithParam<std::string> {};

TEST_P(TermGradients, MatchFiniteDifferences) {
    const auto& pick = loss_terms_by_name().at(GetParam());
    const auto cfg = gradcheck_config();
    for (std::uint64_t seed : {1, 2, 3}) {
        GclModel model(cfg, seed);
        const auto batch = gradcheck_batch(cfg, 10 * seed);
        EXPECT_LE(term_gradient_error(model, batch, pick, 1e-5), 1e-4) << "seed " << seed;
    }
}

INSTANTIATE_TEST_SUITE_P(AllTerms, TermGradients,
                         ::testing::Values("task", "loc", "pub", "gain", "red", "gpred", "total"));

TEST(Model, UnequalLatentWidthsRejected) {
    auto cfg = tiny_config();
    cfg.latent_dims = {6, 5, 6};
    EXPECT_THROW(GclModel(cfg, 1), ConfigError);
}

TEST(Model, ClosedGatesMatchNoInteractionBaseline) {
    const auto cfg = tiny_config();
    GclModel model(cfg, 19);
    const auto batch = make_batch(cfg, 5, 20);
    ForwardOptions closed;
    closed.mode = GainMode::predicted;
    for (Route r : directed_routes(cfg.modalities)) closed.forced_gates[r] = 0.0;
    ForwardOptions bypass;
    bypass.mode = GainMode::predicted;
    bypass.bypass_interaction = true;
    Tape t1, t2;
    const auto a = model.forward(t1, batch.x, nullptr, closed);
    const auto b = model.forward(t2, batch.x, nullptr, bypass);
    for (Modality m : kAllModalities) EXPECT_EQ(a.stage1.channel(m).value(), b.bundle.at(m).value());
    EXPECT_EQ(a.consensus.prediction.value(), b.consensus.prediction.value());
}

TEST(Model, RowPermutationPermutesPredictions) {
    const auto cfg = tiny_config();
    GclModel model(cfg, 21);
    const auto batch = make_batch(cfg, 5, 22);
    const std::vector<std::size_t> perm{4, 2, 0, 3, 1};
    std::array<Matrix, kNumModalities> px;
    for (std::size_t m = 0; m < kNumModalities; ++m) px[m] = batch.x[m].rows_at(perm);
    ForwardOptions o;
    o.mode = GainMode::predicted;
    Tape t1, t2;
    const Matrix a = model.forward(t1, batch.x, nullptr, o).consensus.prediction.value();
    const Matrix b = model.forward(t2, px, nullptr, o).consensus.prediction.value();
    for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(b(i, 0), a(perm[i], 0));
}
