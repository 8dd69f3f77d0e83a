#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sivnode {

struct LmOptions {
    int max_iterations = 200;
    double relative_step_tolerance = 1e-10;
    double initial_damping = 1e-3;
};

// Residual callback fills r (size n_residuals). The Jacobian callback is
// optional; when absent a central-difference Jacobian is used.
struct LmProblem {
    int n_residuals = 0;
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> residuals;
    std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)> jacobian;
};

struct LmResult {
    Eigen::VectorXd params;
    double cost = 0.0;  // sum of squared residuals
    int iterations = 0;
    bool converged = false;
    std::string message;
    Eigen::MatrixXd jacobian;  // at the returned point, free columns only
};

class FitError : public std::runtime_error {
public:
    FitError(const std::string& what, Eigen::VectorXd last) : std::runtime_error(what), last_iterate(std::move(last)) {}
    Eigen::VectorXd last_iterate;
};

// Damped Gauss-Newton with Marquardt diagonal scaling. Parameters with
// frozen[i] == true are held at their initial value.
LmResult levenberg_marquardt(const LmProblem& problem, const Eigen::VectorXd& start,
                             const std::vector<bool>& frozen = {}, const LmOptions& options = {});

Eigen::MatrixXd numeric_jacobian(const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, int n_residuals, double rel_step = 1e-6);

}  // namespace sivnode
