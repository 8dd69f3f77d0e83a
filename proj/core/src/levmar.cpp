#include "sivnode/levmar.hpp"

#include <algorithm>
#include <cmath>

namespace sivnode {

Eigen::MatrixXd numeric_jacobian(const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, int n_residuals, double rel_step) {
    Eigen::MatrixXd jac(n_residuals, x.size());
    Eigen::VectorXd rp(n_residuals), rm(n_residuals);
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double h = rel_step * std::max(1.0, std::abs(x(k)));
        Eigen::VectorXd xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        f(xp, rp);
        f(xm, rm);
        jac.col(k) = (rp - rm) / (2.0 * h);
    }
    return jac;
}

LmResult levenberg_marquardt(const LmProblem& problem, const Eigen::VectorXd& start,
                             const std::vector<bool>& frozen, const LmOptions& options) {
    const Eigen::Index np = start.size();
    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index k = 0; k < np; ++k)
        if (frozen.empty() || !frozen[static_cast<size_t>(k)]) free_idx.push_back(k);

    const int m = problem.n_residuals;
    const auto nf = static_cast<Eigen::Index>(free_idx.size());

    LmResult res;
    res.params = start;
    Eigen::VectorXd r(m);
    problem.residuals(res.params, r);
    res.cost = r.squaredNorm();
    if (!std::isfinite(res.cost)) throw FitError("non-finite residuals at the starting point", start);
    if (nf == 0) {
        res.converged = true;
        res.message = "all parameters frozen";
        return res;
    }

    auto full_jacobian = [&](const Eigen::VectorXd& p) {
        Eigen::MatrixXd j(m, np);
        if (problem.jacobian)
            problem.jacobian(p, j);
        else
            j = numeric_jacobian(problem.residuals, p, m);
        Eigen::MatrixXd jf(m, nf);
        for (Eigen::Index c = 0; c < nf; ++c) jf.col(c) = j.col(free_idx[static_cast<size_t>(c)]);
        return jf;
    };

    double lambda = options.initial_damping;
    Eigen::MatrixXd jf = full_jacobian(res.params);
    Eigen::VectorXd trial_r(m);

    for (int it = 1; it <= options.max_iterations; ++it) {
        res.iterations = it;
        const Eigen::MatrixXd jtj = jf.transpose() * jf;
        const Eigen::VectorXd grad = jf.transpose() * r;
        if (grad.lpNorm<Eigen::Infinity>() == 0.0) {
            res.converged = true;
            res.message = "zero gradient";
            break;
        }

        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd a = jtj;
            for (Eigen::Index k = 0; k < nf; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-300);
            const Eigen::VectorXd step = a.ldlt().solve(-grad);
            Eigen::VectorXd trial = res.params;
            for (Eigen::Index c = 0; c < nf; ++c) trial(free_idx[static_cast<size_t>(c)]) += step(c);
            problem.residuals(trial, trial_r);
            const double trial_cost = trial_r.squaredNorm();

            double pnorm = 0.0, snorm = 0.0;
            for (Eigen::Index c = 0; c < nf; ++c) {
                pnorm += std::pow(res.params(free_idx[static_cast<size_t>(c)]), 2);
                snorm += step(c) * step(c);
            }
            const bool tiny_step = std::sqrt(snorm) <= options.relative_step_tolerance *
                                                          (std::sqrt(pnorm) + options.relative_step_tolerance);

            if (std::isfinite(trial_cost) && trial_cost <= res.cost) {
                res.params = trial;
                r = trial_r;
                res.cost = trial_cost;
                lambda = std::max(lambda / 3.0, 1e-15);
                accepted = true;
                if (tiny_step) {
                    res.converged = true;
                    res.message = "relative step below tolerance";
                }
            } else {
                lambda *= 4.0;
                if (tiny_step || lambda > 1e16) {
                    // No downhill step exists at machine resolution.
                    res.converged = true;
                    res.message = "no further decrease possible";
                    break;
                }
            }
        }
        if (res.converged) break;
        jf = full_jacobian(res.params);
    }
    if (!res.converged) res.message = "iteration limit reached";
    res.jacobian = full_jacobian(res.params);
    return res;
}

}  // namespace sivnode
