#include "barrier.hpp"

#include <cmath>
#include <limits>

namespace v2x::detail {

BarrierSolver::BarrierSolver(const Eigen::MatrixXd& a, Eigen::MatrixXd g, Eigen::VectorXd h,
                             SmoothObjective objective, const SolverConfig& config)
    : g_(std::move(g)), h_(std::move(h)), objective_(std::move(objective)), config_(config) {
    const auto n = g_.cols();
    if (a.rows() == 0) {
        null_ = Eigen::MatrixXd::Identity(n, n);
    } else {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a.transpose());
        const auto rank = qr.rank();
        const Eigen::MatrixXd q = qr.householderQ();
        null_ = q.rightCols(n - rank);
    }
    g_null_ = g_ * null_;
}

double BarrierSolver::barrier_value(const Eigen::VectorXd& z, double t) const {
    const Eigen::VectorXd s = slacks(z);
    if ((s.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    const double f = objective_.value(z);
    if (!std::isfinite(f)) return std::numeric_limits<double>::infinity();
    return t * f - s.array().log().sum();
}

double BarrierSolver::center(Eigen::VectorXd& z, double t, int& steps) const {
    const auto n = z.size();
    Eigen::VectorXd grad(n);
    Eigen::MatrixXd hess(n, n);
    double residual = std::numeric_limits<double>::infinity();

    for (int it = 0; it < config_.newton_max_iter; ++it) {
        objective_.derivatives(z, grad, hess);
        const Eigen::VectorXd inv_s = slacks(z).cwiseInverse();
        // reduced gradient and Hessian of t f - sum log s
        const Eigen::VectorXd gr = null_.transpose() * (t * grad + g_.transpose() * inv_s);
        Eigen::MatrixXd hr = t * (null_.transpose() * hess * null_) +
                             g_null_.transpose() * inv_s.cwiseAbs2().asDiagonal() * g_null_;
        if (gr.size() == 0) {
            residual = 0.0;
            break;
        }

        Eigen::LDLT<Eigen::MatrixXd> ldlt(hr);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            hr.diagonal().array() += 1e-12 * (1.0 + hr.diagonal().cwiseAbs().maxCoeff());
            ldlt.compute(hr);
        }
        const Eigen::VectorXd du = ldlt.solve(-gr);
        const double decrement_sq = -gr.dot(du);
        residual = decrement_sq / 2.0;
        if (!(residual > config_.newton_tol)) break;

        const Eigen::VectorXd dz = null_ * du;
        // keep the iterate strictly inside, then backtrack on the barrier value
        double alpha = 1.0;
        const Eigen::VectorXd g_dz = g_null_ * du;
        const Eigen::VectorXd s = slacks(z);
        for (Eigen::Index i = 0; i < g_dz.size(); ++i) {
            if (g_dz(i) > 0.0) alpha = std::min(alpha, 0.99 * s(i) / g_dz(i));
        }
        const double f0 = barrier_value(z, t);
        const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::fabs(f0));
        int backtracks = 0;
        while (barrier_value(z + alpha * dz, t) > f0 - 0.01 * alpha * decrement_sq + roundoff) {
            if (++backtracks > 60) break;
            alpha *= 0.5;
        }
        if (backtracks > 60) break;  // no further progress at working precision
        z += alpha * dz;
        ++steps;
    }
    return residual;
}

BarrierOutcome BarrierSolver::solve(Eigen::VectorXd z, double eps,
                                    const std::function<bool(const Eigen::VectorXd&)>& stop) const {
    BarrierOutcome out;
    const double m = static_cast<double>(h_.size());
    double t = config_.barrier_t0;
    while (true) {
        out.kkt_residual = center(z, t, out.newton_steps);
        if (stop && stop(z)) {
            out.stopped_early = true;
            break;
        }
        if (m / t < eps) break;
        t *= config_.barrier_mu;
    }
    out.z = std::move(z);
    out.t = t;
    return out;
}

}  // namespace v2x::detail
