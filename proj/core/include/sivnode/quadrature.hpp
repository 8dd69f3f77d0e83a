#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace sivnode {

class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
};

// Adaptive 21-point Gauss-Kronrod on a finite interval. Nodes are interior,
// so integrable endpoint singularities are never evaluated.
QuadResult integrate_gk(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-11,
                        unsigned max_depth = 12);

// Root of f on [lo, hi] with a sign change. Throws QuadratureError otherwise.
double find_root(const std::function<double(double)>& f, double lo, double hi, int max_iter = 200);

// Expands a log-spaced bracket upward from `start` until f changes sign,
// then solves. f must be increasing through the root.
double find_increasing_root(const std::function<double(double)>& f, double start, double limit);

// Brent search for the maximum of a unimodal f on [lo, hi], resolved to
// about 1e-8 of the bracket width.
double find_maximum(const std::function<double(double)>& f, double lo, double hi);

}  // namespace sivnode
