#pragma once

// Log-barrier path following for  min f(z)  s.t.  A z = b,  G z <= h,
// with f smooth and convex. Newton steps are taken in the null space of A, so
// every iterate keeps the equalities it started with. Internal to the
// trajectory block.

#include "v2x/bcd_solver.hpp"

#include <Eigen/Dense>

#include <functional>

namespace v2x::detail {

struct SmoothObjective {
    std::function<double(const Eigen::VectorXd&)> value;
    // gradient and Hessian at z
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&)> derivatives;
};

struct BarrierOutcome {
    Eigen::VectorXd z;
    double t = 0.0;
    double kkt_residual = 0.0;  // half squared Newton decrement at the last centering
    int newton_steps = 0;
    bool stopped_early = false;
};

class BarrierSolver {
public:
    BarrierSolver(const Eigen::MatrixXd& a, Eigen::MatrixXd g, Eigen::VectorXd h, SmoothObjective objective,
                  const SolverConfig& config);

    /// z must satisfy the equalities and be strictly feasible for the
    /// inequalities. `stop` is checked after every centering; returning true
    /// ends the solve.
    BarrierOutcome solve(Eigen::VectorXd z, double eps,
                         const std::function<bool(const Eigen::VectorXd&)>& stop = {}) const;

    Eigen::VectorXd slacks(const Eigen::VectorXd& z) const { return h_ - g_ * z; }

private:
    double barrier_value(const Eigen::VectorXd& z, double t) const;
    // returns the half squared Newton decrement at the final iterate
    double center(Eigen::VectorXd& z, double t, int& steps) const;

    Eigen::MatrixXd null_;  // orthonormal basis of ker A
    Eigen::MatrixXd g_;
    Eigen::MatrixXd g_null_;  // G * null_
    Eigen::VectorXd h_;
    SmoothObjective objective_;
    const SolverConfig& config_;
};

}  // namespace v2x::detail
