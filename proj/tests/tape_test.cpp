#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "nrn/tape.hpp"

using namespace nrn;

namespace {

void randomize(ParamStore& ps, Rng& rng, double scale = 0.5) {
    for (auto& t : ps.all())
        for (auto& x : t->data) x = rng.uniform(-scale, scale);
}

}  // namespace

TEST_CASE("forward values of the primitive ops") {
    Tape tp;
    VarId a = tp.constant({1.0, -2.0, 3.0});
    VarId b = tp.constant({0.5, 4.0, -1.0});

    CHECK(tp.val(tp.add(a, b)) == std::vector<double>{1.5, 2.0, 2.0});
    CHECK(tp.val(tp.sub(a, b)) == std::vector<double>{0.5, -6.0, 4.0});
    CHECK(tp.val(tp.mul(a, b)) == std::vector<double>{0.5, -8.0, -3.0});
    CHECK(tp.val(tp.affine(a, 2.0, 1.0)) == std::vector<double>{3.0, -3.0, 7.0});
    CHECK(tp.scalar(tp.dot(a, b)) == doctest::Approx(-10.5));
    CHECK(tp.scalar(tp.sum(a)) == doctest::Approx(2.0));
    CHECK(tp.scalar(tp.pick(a, 2)) == 3.0);
    CHECK(tp.val(tp.concat(a, b)).size() == 6);
    CHECK(tp.val(tp.slice(a, 1, 2)) == std::vector<double>{-2.0, 3.0});
    CHECK(tp.val(tp.relu(a)) == std::vector<double>{1.0, 0.0, 3.0});

    VarId sig = tp.sigmoid(tp.constant({0.0}));
    CHECK(tp.val(sig)[0] == doctest::Approx(0.5));
    CHECK(tp.val(tp.tanh_(tp.constant({0.0})))[0] == 0.0);

    VarId lse = tp.logsumexp(tp.constant({0.0, 0.0}));
    CHECK(tp.scalar(lse) == doctest::Approx(std::log(2.0)));

    // softmax normalizes and is stable under large shifts
    VarId sm = tp.softmax(tp.constant({1000.0, 1001.0, 999.0}));
    double sum = 0;
    for (double v : tp.val(sm)) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("matvec computes W x and scale_by scales") {
    ParamStore ps;
    Tensor& W = ps.add("W", 2, 3);
    W.data = {1, 2, 3, 4, 5, 6};
    Tape tp;
    VarId x = tp.constant({1.0, 0.0, -1.0});
    CHECK(tp.val(tp.matvec(W, x)) == std::vector<double>{-2.0, -2.0});

    VarId s = tp.constant({3.0});
    CHECK(tp.val(tp.scale_by(x, s)) == std::vector<double>{3.0, 0.0, -3.0});
}

TEST_CASE("gradients flow through shared subexpressions") {
    // y = sum(x*x + x); dy/dx = 2x + 1
    ParamStore ps;
    Tensor& x = ps.add("x", 3);
    x.data = {1.0, -0.5, 2.0};
    Tape tp;
    VarId xv = tp.param(x);
    VarId y = tp.sum(tp.add(tp.mul(xv, xv), xv));
    tp.backward(y);
    CHECK(x.grad[0] == doctest::Approx(3.0));
    CHECK(x.grad[1] == doctest::Approx(0.0));
    CHECK(x.grad[2] == doctest::Approx(5.0));
}

TEST_CASE("param_row accumulates into the right row") {
    ParamStore ps;
    Tensor& E = ps.add("E", 3, 2);
    E.data = {1, 2, 3, 4, 5, 6};
    Tape tp;
    VarId row = tp.param_row(E, 1);
    CHECK(tp.val(row) == std::vector<double>{3, 4});
    tp.backward(tp.sum(row));
    CHECK(E.grad == std::vector<double>{0, 0, 1, 1, 0, 0});
}

TEST_CASE("every op passes central finite differences") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        ParamStore ps;
        Tensor& W = ps.add("W", 4, 3);
        Tensor& b = ps.add("b", 4);
        Tensor& x = ps.add("x", 3);
        Tensor& c = ps.add("c", 4);
        randomize(ps, rng);

        auto composite = [&](bool backward) {
            Tape tp;
            VarId xv = tp.param(x);
            VarId cv = tp.param(c);
            VarId lin = tp.add(tp.matvec(W, xv), tp.param(b));
            VarId gate = tp.mul(tp.sigmoid(lin), tp.tanh_(cv));
            VarId act = tp.add(tp.relu(gate), tp.exp_(tp.affine(gate, 0.5, -0.1)));
            VarId sm = tp.softmax(act);
            VarId left = tp.slice(tp.concat(sm, cv), 1, 4);
            VarId scaled = tp.scale_by(left, tp.pick(act, 0));
            VarId loss = tp.add(tp.add(tp.logsumexp(scaled), tp.dot(left, cv)),
                                tp.sub(tp.sum(tp.mul(sm, cv)), tp.pick(cv, 1)));
            double value = tp.scalar(loss);
            if (backward) tp.backward(loss);
            return value;
        };

        auto res = testing::grad_check(ps, composite, rng, 6);
        CHECK(res.checked > 0);
        CHECK(res.failures == 0);
    }
}

TEST_CASE("shape mismatches are rejected") {
    Tape tp;
    VarId a = tp.constant({1.0, 2.0});
    VarId b = tp.constant({1.0, 2.0, 3.0});
    CHECK_THROWS_AS(tp.add(a, b), std::invalid_argument);
    CHECK_THROWS_AS(tp.pick(a, 5), std::out_of_range);
    CHECK_THROWS_AS(tp.slice(a, 1, 4), std::out_of_range);
    CHECK_THROWS_AS(tp.backward(a), std::invalid_argument);

    ParamStore ps;
    Tensor& W = ps.add("W", 2, 3);
    CHECK_THROWS_AS(tp.matvec(W, a), std::invalid_argument);
    CHECK_THROWS_AS(tp.param_row(W, 9), std::out_of_range);
}
