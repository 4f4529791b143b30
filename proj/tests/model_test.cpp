#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "nrn/model.hpp"
#include "nrn/sampler.hpp"
#include "oracle.hpp"

using namespace nrn;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Vocab small_vocab(int n_entities = 5) {
    Vocab v;
    for (int i = 0; i < n_entities; ++i) v.intern_entity("E" + std::to_string(i));
    v.intern_relation("r0");
    v.intern_relation("r1");
    int t0 = v.intern_value_type("Year");
    int t1 = v.intern_value_type("Meter");
    v.intern_attribute("a0", t0);
    v.intern_attribute("a1", t1);
    v.intern_value(3, t0);
    v.intern_value(6, t0);
    v.intern_value(2, t1);
    return v;
}

Model small_model(int d = 2, std::uint64_t seed = 1,
                  ModelKind kind = ModelKind::TwoPhase) {
    EncodingSpec spec;
    spec.kind = EncoderKind::Sinusoidal;
    spec.dim = d;
    ModelConfig cfg;
    cfg.kind = kind;
    cfg.d = d;
    Model m(cfg, small_vocab(), spec);
    Rng rng(seed);
    m.init_params(rng);
    return m;
}

void zero_params(Model& m) {
    for (auto& t : m.params().all()) std::fill(t->data.begin(), t->data.end(), 0.0);
}

// plain-loop re-implementation of the gated transition, kept deliberately
// free of the tape
std::vector<double> gated_reference(const GatedWeights& w, const std::vector<double>& x,
                                    const std::vector<double>& ctx) {
    auto mv = [](const Tensor& m, const std::vector<double>& v) {
        std::vector<double> out(m.rows, 0.0);
        for (int i = 0; i < m.rows; ++i)
            for (int j = 0; j < m.cols; ++j) out[i] += m.data[i * m.cols + j] * v[j];
        return out;
    };
    int out_dim = w.Wp->rows;
    std::vector<double> p = mv(*w.Wp, x);
    for (int i = 0; i < out_dim; ++i) p[i] += w.bp->data[i];
    std::vector<double> wz = mv(*w.Wz, ctx), uz = mv(*w.Uz, p);
    std::vector<double> wr = mv(*w.Wr, ctx), ur = mv(*w.Ur, p);
    std::vector<double> z(out_dim), r(out_dim);
    for (int i = 0; i < out_dim; ++i) {
        z[i] = 1.0 / (1.0 + std::exp(-(wz[i] + uz[i] + w.bz->data[i])));
        r[i] = 1.0 / (1.0 + std::exp(-(wr[i] + ur[i] + w.br->data[i])));
    }
    std::vector<double> rp(out_dim);
    for (int i = 0; i < out_dim; ++i) rp[i] = r[i] * p[i];
    std::vector<double> wh = mv(*w.Wh, ctx), uh = mv(*w.Uh, rp);
    std::vector<double> out(out_dim);
    for (int i = 0; i < out_dim; ++i) {
        double t = std::tanh(wh[i] + uh[i] + w.bh->data[i]);
        out[i] = (1.0 - z[i]) * p[i] + z[i] * t;
    }
    return out;
}

}  // namespace

TEST_CASE("zero-weight gated transition maps everything to zero") {
    Model m = small_model(2);
    zero_params(m);
    Tape tp;
    VarId q = tp.constant({0.7, -0.3});
    VarId theta = m.attr_projection(tp, q, 0);
    // p = 0, z = 0.5, t = 0, so the output and both halves of theta vanish
    for (double v : tp.val(theta)) CHECK(v == 0.0);
    // mu = 0 and sigma^2 = exp(0) = 1
    CHECK(tp.val(theta).size() == 4);
}

TEST_CASE("a strongly negative update gate passes p through") {
    Model m = small_model(2, 3);
    std::fill(m.np_weights().bz->data.begin(), m.np_weights().bz->data.end(), -40.0);
    Tape tp;
    VarId theta = tp.constant({0.2, -0.1, 0.4, 0.3});
    VarId out = m.num_projection(tp, theta, 0);
    // out -> p = Wp theta + bp as z -> 0
    VarId p = tp.add(tp.matvec(*m.np_weights().Wp, theta), tp.param(*m.np_weights().bp));
    for (std::size_t i = 0; i < tp.dim(out); ++i)
        CHECK(tp.val(out)[i] == doctest::Approx(tp.val(p)[i]).epsilon(1e-12));
}

TEST_CASE("gated transition matches the straight-line reference") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Model m = small_model(2, seed);
        Rng rng(seed * 7 + 1);
        std::vector<double> q = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        std::vector<double> theta4 = {rng.uniform(-1, 1), rng.uniform(-1, 1),
                                      rng.uniform(-1, 1), rng.uniform(-1, 1)};

        Tape tp;
        // ap: d=2 -> k=4 with the attribute embedding as context
        VarId out = m.attr_projection(tp, tp.constant(q), 1);
        std::vector<double> ctx(m.params().at("attr_emb").row_ptr(1),
                                m.params().at("attr_emb").row_ptr(1) + 4);
        auto ref = gated_reference(m.ap_weights(), q, ctx);
        REQUIRE(ref.size() == tp.dim(out));
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(std::abs(tp.val(out)[i] - ref[i]) < 1e-10);

        // np: k=4 -> k=4
        Tape tp2;
        VarId out2 = m.num_projection(tp2, tp2.constant(theta4), 2);
        std::vector<double> ctx2(m.params().at("numrel_emb").row_ptr(2),
                                 m.params().at("numrel_emb").row_ptr(2) + 4);
        auto ref2 = gated_reference(m.np_weights(), theta4, ctx2);
        for (std::size_t i = 0; i < ref2.size(); ++i)
            CHECK(std::abs(tp2.val(out2)[i] - ref2[i]) < 1e-10);
    }
}

TEST_CASE("projections are deterministic and attribute identity matters") {
    Model m = small_model(2, 5);
    Tape tp;
    VarId q = tp.constant({0.3, 0.9});
    VarId t1 = m.attr_projection(tp, q, 0);
    VarId t2 = m.attr_projection(tp, q, 0);
    CHECK(tp.val(t1) == tp.val(t2));

    VarId other = m.attr_projection(tp, q, 1);
    CHECK(tp.val(t1) != tp.val(other));

    Tape tr;
    VarId theta = tr.constant({0.1, 0.2, 0.3, 0.4});
    CHECK(tr.val(m.rev_attr_projection(tr, theta, 0)) !=
          tr.val(m.rev_attr_projection(tr, theta, 1)));

    CHECK_THROWS_AS(m.rel_projection(tp, q, 99), ModelError);
    CHECK_THROWS_AS(m.attr_projection(tp, q, -1), ModelError);
}

TEST_CASE("deepset merge is permutation invariant and handles duplicates") {
    Model m = small_model(2, 9);
    Tape tp;
    VarId a = tp.constant({0.5, -0.2, 0.1, 0.8});
    VarId b = tp.constant({-0.3, 0.4, 0.9, -0.6});
    VarId c = tp.constant({0.2, 0.2, -0.5, 0.3});

    auto ab = tp.val(m.deepset_merge(tp, {a, b}, false, Phase::Numeric));
    auto ba = tp.val(m.deepset_merge(tp, {b, a}, false, Phase::Numeric));
    REQUIRE(ab.size() == ba.size());
    for (std::size_t i = 0; i < ab.size(); ++i) CHECK(std::abs(ab[i] - ba[i]) <= 1e-10);

    auto abc = tp.val(m.deepset_merge(tp, {a, b, c}, true, Phase::Numeric));
    auto cab = tp.val(m.deepset_merge(tp, {c, a, b}, true, Phase::Numeric));
    for (std::size_t i = 0; i < abc.size(); ++i) CHECK(std::abs(abc[i] - cab[i]) <= 1e-10);

    // duplicates: [A,A] and [A,A,A] pool to the same state
    auto aa = tp.val(m.deepset_merge(tp, {a, a}, false, Phase::Numeric));
    auto aaa = tp.val(m.deepset_merge(tp, {a, a, a}, false, Phase::Numeric));
    for (std::size_t i = 0; i < aa.size(); ++i) CHECK(std::abs(aa[i] - aaa[i]) <= 1e-12);

    // union and intersection use distinct weights
    auto u = tp.val(m.deepset_merge(tp, {a, b}, true, Phase::Numeric));
    CHECK(u != ab);

    CHECK_THROWS_AS(m.deepset_merge(tp, {a}, false, Phase::Numeric), ModelError);
    CHECK_THROWS_AS(m.deepset_merge(tp, {a, b, c, c}, false, Phase::Numeric), ModelError);
    VarId ent = tp.constant({0.1, 0.2});
    CHECK_THROWS_AS(m.deepset_merge(tp, {a, ent}, false, Phase::Numeric), ModelError);
}

TEST_CASE("encode_query of a 1p graph is one reverse attribute projection") {
    Model m = small_model(2, 11);
    ComputationGraph g = parse_query("(rap#a0,(nv#3@Year))", m.vocab());
    Tape tp;
    EncoderState st = m.encode_query(tp, g);
    CHECK(st.phase == Phase::Entity);

    Tape tq2;
    VarId anchor = tq2.constant(m.anchor_value_state(3, 0));
    VarId direct = m.rev_attr_projection(tq2, anchor, 0);
    CHECK(tp.val(st.var) == tq2.val(direct));

    // anchor state carries mu = psi(x) and the fixed anchor variance
    auto anchor_state = m.anchor_value_state(3, 0);
    auto psi = encode_value(3, 0, m.encoding());
    CHECK(anchor_state[0] == psi[0]);
    CHECK(anchor_state[1] == psi[1]);
    CHECK(std::exp(anchor_state[2]) == doctest::Approx(0.01));
    CHECK(std::exp(anchor_state[3]) == doctest::Approx(0.01));
}

TEST_CASE("encoding the long latitude-style chain walks both phases") {
    Model m = small_model(2, 13);
    // anchor entity -> rp -> ap -> np -> rap: entity phase at both ends with a
    // numeric segment in the middle
    ComputationGraph g = parse_query(
        "(rap#a0,(np#GreaterThan,(ap#a0,(rp#r0,(e#E1)))))", m.vocab());
    CHECK(g.nodes.size() == 5);
    CHECK(g.nodes[0].phase == Phase::Entity);
    CHECK(g.nodes[1].phase == Phase::Entity);
    CHECK(g.nodes[2].phase == Phase::Numeric);
    CHECK(g.nodes[3].phase == Phase::Numeric);
    CHECK(g.root_phase() == Phase::Entity);
    Tape tp;
    EncoderState st = m.encode_query(tp, g);
    CHECK(tp.dim(st.var) == 2);
    for (double v : tp.val(st.var)) CHECK(std::isfinite(v));
}

TEST_CASE("encode_query is traversal-order independent") {
    Model m = small_model(2, 17);
    ComputationGraph g = parse_query(
        "(i,(np#GreaterThan,(nv#3@Year)),(ap#a0,(e#E0)))", m.vocab());

    Tape tp;
    auto via_post_order = tp.val(m.encode_query(tp, g).var);

    // same DAG with the intersection's children stored in the other order,
    // which makes the tape evaluate the branches in reverse
    ComputationGraph swapped = g;
    std::swap(swapped.nodes[g.root()].children[0], swapped.nodes[g.root()].children[1]);
    // deepset inputs must keep their original order for a fair comparison,
    // so re-swap inside the merge by comparing against the permuted output:
    Tape tq;
    auto via_swapped = tq.val(m.encode_query(tq, swapped).var);

    REQUIRE(via_post_order.size() == via_swapped.size());
    for (std::size_t i = 0; i < via_post_order.size(); ++i)
        CHECK(std::abs(via_post_order[i] - via_swapped[i]) <= 1e-10);
}

TEST_CASE("entity scores are inner products and softmax normalizes") {
    Model m = small_model(2, 19);
    Tensor& emb = m.params().at("entity_emb");

    Tape tp;
    VarId q = tp.constant({emb.data[0], emb.data[1]});  // equal to e_0
    double norm2 = emb.data[0] * emb.data[0] + emb.data[1] * emb.data[1];
    CHECK(tp.scalar(m.entity_score(tp, q, 0)) == doctest::Approx(norm2));

    VarId orth = tp.constant({-emb.data[1], emb.data[0]});
    CHECK(tp.scalar(m.entity_score(tp, orth, 0)) == doctest::Approx(0.0));

    VarId twice = tp.affine(q, 2.0, 0.0);
    CHECK(tp.scalar(m.entity_score(tp, twice, 0)) == doctest::Approx(2.0 * norm2));

    VarId probs = tp.softmax(m.entity_scores(tp, q));
    double sum = 0;
    for (double p : tp.val(probs)) sum += p;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
}

TEST_CASE("uniform scores give ln(n) entity loss and a dominant answer drives it to zero") {
    Model m = small_model(2, 21);
    Tensor& emb = m.params().at("entity_emb");
    // two-entity toy inside the 5-entity table: make all rows identical so
    // every score ties; loss = ln(n)
    for (int r = 1; r < emb.rows; ++r) {
        emb.data[r * 2] = emb.data[0];
        emb.data[r * 2 + 1] = emb.data[1];
    }
    ComputationGraph g = parse_query("(e#E0)", m.vocab());
    Tape tp;
    VarId loss = m.entity_loss(tp, {{&g, 0}});
    CHECK(tp.scalar(loss) == doctest::Approx(std::log(5.0)).epsilon(1e-9));

    // now let the answer dominate
    emb.data[0] = 60.0;
    emb.data[1] = 0.0;
    for (int r = 1; r < emb.rows; ++r) {
        emb.data[r * 2] = -60.0;
        emb.data[r * 2 + 1] = 0.0;
    }
    Tape tq;
    CHECK(tq.scalar(m.entity_loss(tq, {{&g, 0}})) < 1e-6);
}

TEST_CASE("gaussian logpdf matches the standard normal closed form") {
    Tape tp;
    // d=1: theta = (mu=0, s=0)
    VarId theta = tp.constant({0.0, 0.0});
    CHECK(tp.scalar(gaussian_logpdf(tp, theta, {0.0})) ==
          doctest::Approx(-0.5 * kLog2Pi).epsilon(1e-12));
    CHECK(tp.scalar(gaussian_logpdf(tp, theta, {1.0})) ==
          doctest::Approx(-0.5 * kLog2Pi - 0.5).epsilon(1e-12));
}

TEST_CASE("gaussian density integrates to one under the trapezoid rule") {
    // d=1, a slightly offset non-unit variance
    double mu = 0.3, s = std::log(1.7);
    const int n = 20000;
    double lo = mu - 10.0 * std::sqrt(1.7), hi = mu + 10.0 * std::sqrt(1.7);
    double h = (hi - lo) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        double x = lo + h * i;
        Tape tp;
        double lp = tp.scalar(gaussian_logpdf(tp, tp.constant({mu, s}), {x}));
        double w = (i == 0 || i == n) ? 0.5 : 1.0;
        acc += w * std::exp(lp);
    }
    CHECK(acc * h == doctest::Approx(1.0).epsilon(1e-6));

    // d=2 over a product grid
    std::vector<double> theta2 = {0.1, -0.2, std::log(0.8), std::log(1.3)};
    const int n2 = 220;
    double acc2 = 0.0;
    for (int i = 0; i <= n2; ++i) {
        for (int j = 0; j <= n2; ++j) {
            double x0 = -10.0 + 20.0 * i / n2 + 0.1;
            double x1 = -10.0 + 20.0 * j / n2 - 0.2;
            Tape tp;
            double lp = tp.scalar(gaussian_logpdf(tp, tp.constant(theta2), {x0, x1}));
            double w = ((i == 0 || i == n2) ? 0.5 : 1.0) * ((j == 0 || j == n2) ? 0.5 : 1.0);
            acc2 += w * std::exp(lp);
        }
    }
    double cell = (20.0 / n2) * (20.0 / n2);
    CHECK(acc2 * cell == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("type prior peaks at the type mean") {
    Model m = small_model(2, 23);
    Tensor& mean = m.params().at("prior_mean");
    Tensor& logvar = m.params().at("prior_logvar");
    std::fill(logvar.data.begin(), logvar.data.end(), 0.0);
    mean.data[0] = 0.4;
    mean.data[1] = -0.2;

    Tape tp;
    VarId at_mode = tp.constant({0.4, -0.2, 9.0, 9.0});  // the variance half is ignored
    CHECK(tp.scalar(m.type_prior_logpdf(tp, 0, at_mode)) ==
          doctest::Approx(-kLog2Pi).epsilon(1e-12));

    double prev = tp.scalar(m.type_prior_logpdf(tp, 0, at_mode));
    for (double step : {0.1, 0.4, 1.0, 3.0}) {
        VarId off = tp.constant({0.4 + step, -0.2, 0.0, 0.0});
        double lp = tp.scalar(m.type_prior_logpdf(tp, 0, off));
        CHECK(lp < prev);
        prev = lp;
    }
    CHECK_THROWS_AS(m.type_prior_logpdf(tp, 99, at_mode), ModelError);
}

TEST_CASE("attribute loss at the mode hits its closed form") {
    Model m = small_model(2, 25);
    zero_params(m);  // theta = 0 for every query, priors at zero mean, unit var
    ComputationGraph g = parse_query("(ap#a0,(e#E0))", m.vocab());
    // answer value 3 of type Year; |psi|^2 = 1 for a sinusoidal pair, so
    // loss = 0.5*|psi|^2 + d*log(2*pi)
    Tape tp;
    double loss = tp.scalar(m.attribute_loss(tp, {{&g, 0}}));
    CHECK(loss == doctest::Approx(0.5 + 2.0 * kLog2Pi).epsilon(1e-10));
}

TEST_CASE("moving mu toward the target lowers the loss") {
    Tape tp;
    std::vector<double> x = {0.6, -0.3};
    VarId far = tp.constant({0.0, 0.0, 0.0, 0.0});
    VarId near = tp.constant({0.45, -0.2, 0.0, 0.0});
    CHECK(tp.scalar(gaussian_logpdf(tp, near, x)) > tp.scalar(gaussian_logpdf(tp, far, x)));
}

TEST_CASE("numeric states keep strictly positive variance through every operation") {
    Model m = small_model(2, 27);
    ComputationGraph g = parse_query(
        "(i,(np#GreaterThan,(np#SmallerThan,(nv#3@Year))),(ap#a0,(e#E2)))", m.vocab());
    Tape tp;
    Model* mm = &m;
    // walk every node and check exp(s) > 0 and finite for numeric states
    std::vector<VarId> vars;
    EncoderState st = mm->encode_query(tp, g);
    (void)st;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (g.nodes[i].phase != Phase::Numeric) continue;
        // re-encode the prefix subgraph rooted at i
        ComputationGraph sub;
        sub.nodes.assign(g.nodes.begin(), g.nodes.begin() + i + 1);
        // drop trailing nodes that are not ancestors of i; re-encoding the
        // prefix is safe because children precede parents
        Tape ts;
        EncoderState s = mm->encode_query(ts, sub);
        const auto& v = ts.val(s.var);
        for (std::size_t j = v.size() / 2; j < v.size(); ++j) {
            CHECK(std::isfinite(v[j]));
            CHECK(std::exp(v[j]) > 0.0);
        }
    }
}

TEST_CASE("gradient suite: every spec operation against finite differences") {
    for (int d : {2, 4}) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            Model m = small_model(d, seed * 31);
            Rng rng(seed * 101 + d);

            // losses exercise encode_query -> projections -> deepset -> scores
            ComputationGraph ge = parse_query(
                "(rp#r0,(i,(rap#a0,(nv#3@Year)),(rp#r1,(e#E1))))", m.vocab());
            ComputationGraph gn = parse_query(
                "(np#GreaterThan,(u,(np#SmallerThan,(nv#3@Year)),(ap#a0,(e#E0))))",
                m.vocab());

            auto entity_fn = [&](bool backward) {
                Tape tp;
                VarId loss = m.entity_loss(tp, {{&ge, 2}, {&ge, 0}});
                double v = tp.scalar(loss);
                if (backward) tp.backward(loss);
                return v;
            };
            auto res_e = testing::grad_check(m.params(), entity_fn, rng, 3, 1e-5, 1e-3);
            CHECK(res_e.failures == 0);

            auto attr_fn = [&](bool backward) {
                Tape tp;
                VarId loss = m.attribute_loss(tp, {{&gn, 0}, {&gn, 1}});
                double v = tp.scalar(loss);
                if (backward) tp.backward(loss);
                return v;
            };
            auto res_a = testing::grad_check(m.params(), attr_fn, rng, 3, 1e-5, 1e-3);
            CHECK(res_a.failures == 0);
        }
    }
}

TEST_CASE("flat ablation encodes values as opaque rows") {
    Model m = small_model(2, 33, ModelKind::Flat);
    ComputationGraph g = parse_query("(rap#a0,(nv#3@Year))", m.vocab());
    Tape tp;
    EncoderState st = m.encode_query(tp, g);
    CHECK(st.phase == Phase::Entity);
    CHECK(tp.dim(st.var) == 2);  // everything is a d-vector

    ComputationGraph gn = parse_query("(ap#a0,(e#E0))", m.vocab());
    Tape tq;
    EncoderState sn = m.encode_query(tq, gn);
    CHECK(sn.phase == Phase::Numeric);
    CHECK(tq.dim(sn.var) == 2);

    // attribute loss degrades to a softmax over value rows
    Tape tl;
    double loss = tl.scalar(m.attribute_loss(tl, {{&gn, 0}}));
    CHECK(std::isfinite(loss));
    CHECK(loss > 0.0);

    // grads flow
    Rng rng(5);
    auto fn = [&](bool backward) {
        Tape t;
        VarId l = m.attribute_loss(t, {{&gn, 0}});
        double v = t.scalar(l);
        if (backward) t.backward(l);
        return v;
    };
    auto res = testing::grad_check(m.params(), fn, rng, 2);
    CHECK(res.failures == 0);
}

TEST_CASE("score_value ranks by log density for the two-phase model") {
    Model m = small_model(2, 35);
    // theta centred exactly on psi(3): value 3 must outscore value 6
    auto psi3 = encode_value(3, 0, m.encoding());
    std::vector<double> theta = {psi3[0], psi3[1], std::log(0.05), std::log(0.05)};
    double s3 = m.score_value(theta, 0);  // value id 0 is (3, Year)
    double s6 = m.score_value(theta, 1);  // value id 1 is (6, Year)
    CHECK(s3 > s6);
    CHECK(m.value_candidates(0) == std::vector<int>{0, 1});
    CHECK(m.value_candidates(1) == std::vector<int>{2});
}
