#include "sivnode/quadrature.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

namespace sivnode {

QuadResult integrate_gk(const std::function<double(double)>& f, double a, double b, double rel_tol,
                        unsigned max_depth) {
    QuadResult out;
    if (a == b) return out;
    double err = 0.0;
    out.value = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, a, b, max_depth, rel_tol, &err);
    out.error = err;
    if (!std::isfinite(out.value)) throw QuadratureError("quadrature produced a non-finite value");
    return out;
}

double find_root(const std::function<double(double)>& f, double lo, double hi, int max_iter) {
    const double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) throw QuadratureError("root is not bracketed");
    std::uintmax_t it = static_cast<std::uintmax_t>(max_iter);
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                     boost::math::tools::eps_tolerance<double>(48), it);
    return 0.5 * (r.first + r.second);
}

double find_increasing_root(const std::function<double(double)>& f, double start, double limit) {
    double lo = start;
    double hi = start;
    if (f(lo) > 0.0) {
        while (f(lo) > 0.0) {
            hi = lo;
            lo *= 0.5;
            if (lo < 1e-300) throw QuadratureError("no root above zero");
        }
    } else {
        while (f(hi) < 0.0) {
            lo = hi;
            hi *= 2.0;
            if (hi > limit) throw QuadratureError("root not found below the search limit");
        }
    }
    return find_root(f, lo, hi);
}

double find_maximum(const std::function<double(double)>& f, double lo, double hi) {
    if (!(lo < hi)) throw QuadratureError("find_maximum: need lo < hi");
    std::uintmax_t it = 500;
    // Search on the unit interval: the minimiser's absolute tolerance floor
    // then scales with the bracket width.
    const double w = hi - lo;
    const auto r = boost::math::tools::brent_find_minima([&](double u) { return -f(lo + u * w); }, 0.0, 1.0,
                                                         std::numeric_limits<double>::digits / 2, it);
    return lo + r.first * w;
}

}  // namespace sivnode
