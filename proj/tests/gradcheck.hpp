#pragma once

// Central finite-difference oracle for the reverse-mode tape: perturbs
// sampled parameter elements and compares (f(w+h)-f(w-h))/2h against the
// analytic gradient left in the tensors by one backward pass.

#include <cmath>
#include <functional>

#include "nrn/rng.hpp"
#include "nrn/tensor.hpp"

namespace nrn::testing {

struct GradCheckResult {
    long checked = 0;
    long failures = 0;
    double worst_rel = 0.0;
};

// `loss(do_backward)` must rebuild the forward pass from the current tensor
// values; with do_backward it also accumulates gradients.
inline GradCheckResult grad_check(ParamStore& params,
                                  const std::function<double(bool)>& loss, Rng& rng,
                                  int samples_per_tensor = 4, double h = 1e-5,
                                  double tol = 1e-4) {
    GradCheckResult res;
    params.zero_grad();
    loss(true);

    std::vector<std::vector<double>> analytic;
    for (const auto& t : params.all()) analytic.push_back(t->grad);

    for (std::size_t ti = 0; ti < params.all().size(); ++ti) {
        Tensor& t = *params.all()[ti];
        for (int s = 0; s < samples_per_tensor && t.size() > 0; ++s) {
            std::size_t j = rng.below(t.size());
            double orig = t.data[j];
            t.data[j] = orig + h;
            double fp = loss(false);
            t.data[j] = orig - h;
            double fm = loss(false);
            t.data[j] = orig;

            double fd = (fp - fm) / (2.0 * h);
            double an = analytic[ti][j];
            double err = std::abs(fd - an);
            double denom = std::max(std::abs(fd), std::abs(an));
            // absolute floor covers elements the loss genuinely ignores
            bool ok = err <= tol * denom || err <= 1e-7;
            res.checked += 1;
            if (!ok) res.failures += 1;
            if (denom > 1e-12) res.worst_rel = std::max(res.worst_rel, err / denom);
        }
    }
    return res;
}

}  // namespace nrn::testing
