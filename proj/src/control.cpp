#include "kma/control.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "kma/errors.hpp"

namespace kma {

Matrix lift_cost(const Matrix& Q_x, const Matrix& C) {
    if (Q_x.rows() != C.rows()) {
        throw ConfigError("lift_cost: Q_x and C row counts must match");
    }
    const Matrix Q_z = C.transpose() * Q_x * C;
    return 0.5 * (Q_z + Q_z.transpose());
}

namespace {

double spectral_radius(const Matrix& M) {
    return Eigen::EigenSolver<Matrix>(M, false)
        .eigenvalues()
        .cwiseAbs()
        .maxCoeff();
}

Matrix riccati_update(const Matrix& A, const Matrix& B, const Matrix& Q_z,
                      const Matrix& R, const Matrix& P) {
    const Matrix BtP = B.transpose() * P;
    const Matrix S = R + BtP * B;
    const Matrix K = S.llt().solve(BtP * A);
    Matrix next = Q_z + A.transpose() * P * A -
                  A.transpose() * P * B * K;
    return 0.5 * (next + next.transpose());
}

}  // namespace

Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q_z,
                  const Matrix& R, double tol, int max_iter) {
    Matrix P = 0.5 * (Q_z + Q_z.transpose());
    for (int it = 0; it < max_iter; ++it) {
        const Matrix next = riccati_update(A, B, Q_z, R, P);
        const double delta = (next - P).cwiseAbs().maxCoeff();
        P = next;
        if (!P.allFinite()) break;
        // Relative test: weakly controllable unstable modes give legitimate
        // solutions with huge ||P||, where an absolute 1e-10 is below the
        // floating-point resolution of the iterates.
        if (delta < tol * std::max(1.0, P.cwiseAbs().maxCoeff())) return P;
    }
    throw NumericError(
        "solve_dare: no convergence; the pair (A, B) appears not stabilizable");
}

double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q_z,
                     const Matrix& R, const Matrix& P) {
    return (P - riccati_update(A, B, Q_z, R, P)).cwiseAbs().maxCoeff();
}

LqrController lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q_z,
                       const Matrix& R, double tol, int max_iter) {
    LqrController ctrl;
    ctrl.P = solve_dare(A, B, Q_z, R, tol, max_iter);
    const Matrix BtP = B.transpose() * ctrl.P;
    ctrl.K = (R + BtP * B).llt().solve(BtP * A);
    ctrl.closed_loop_spectral_radius = spectral_radius(A - B * ctrl.K);
    if (ctrl.closed_loop_spectral_radius >= 1.0) {
        std::ostringstream msg;
        msg << "lqr_gain: closed loop unstable (spectral radius "
            << ctrl.closed_loop_spectral_radius << ")";
        throw NumericError(msg.str());
    }
    return ctrl;
}

ReferenceFn constant_reference(const Vector& r) {
    return [r](double) { return r; };
}

ReferenceFn step_reference(int n, double lo, double hi, double t_switch) {
    return [n, lo, hi, t_switch](double t) {
        Vector r = Vector::Zero(n);
        r[0] = t <= t_switch ? lo : hi;
        return r;
    };
}

QpProblem build_mpc_qp(const WeightedModel& wm, const MpcSpec& spec,
                       const Vector& z0, double t, double dt) {
    const int H = spec.horizon;
    if (H < 1) throw ConfigError("mpc: horizon must be >= 1");
    const int nz = static_cast<int>(wm.A.rows());
    const int p = static_cast<int>(wm.B.cols());
    const int n = static_cast<int>(wm.CA.rows());
    if (z0.size() != nz) throw ConfigError("mpc: z0 dimension mismatch");
    if (spec.u_min.size() != p || spec.u_max.size() != p) {
        throw ConfigError("mpc: input bound dimension mismatch");
    }
    for (int i = 0; i < p; ++i) {
        if (!(spec.u_min[i] < spec.u_max[i])) {
            throw ConfigError("mpc: u_min must be elementwise below u_max");
        }
    }

    // Prediction at step k (state y_k = x at time t + k dt):
    //   y_k = CA z_{k-1} + CB u_{k-1},  z_k = A z_{k-1} + B u_{k-1}.
    // Stacked: y = F z0 + G U with G block lower-triangular.
    Matrix F(H * n, nz);
    Matrix G = Matrix::Zero(H * n, H * p);
    Matrix Apow = Matrix::Identity(nz, nz);  // A^{k-1}
    for (int k = 1; k <= H; ++k) {
        F.middleRows((k - 1) * n, n) = wm.CA * Apow;
        G.block((k - 1) * n, (k - 1) * p, n, p) = wm.CB;
        // Contributions of earlier inputs: CA A^{k-2-j} B for j <= k-2.
        Matrix Aj = Matrix::Identity(nz, nz);
        for (int j = k - 2; j >= 0; --j) {
            G.block((k - 1) * n, j * p, n, p) = wm.CA * Aj * wm.B;
            Aj = Aj * wm.A;
        }
        Apow = Apow * wm.A;
    }

    Vector r_stacked(H * n);
    for (int k = 1; k <= H; ++k) {
        const double t_k = spec.preview ? t + k * dt : t;
        r_stacked.segment((k - 1) * n, n) = spec.reference(t_k);
    }

    Matrix Qbar = Matrix::Zero(H * n, H * n);
    Matrix Rbar = Matrix::Zero(H * p, H * p);
    for (int k = 0; k < H; ++k) {
        Qbar.block(k * n, k * n, n, n) = spec.Q_x;
        Rbar.block(k * p, k * p, p, p) = spec.R;
    }

    QpProblem qp;
    Matrix Hqp = 2.0 * (G.transpose() * Qbar * G + Rbar);
    qp.H = 0.5 * (Hqp + Hqp.transpose());
    qp.f = 2.0 * G.transpose() * (Qbar * (F * z0 - r_stacked));
    qp.lower.resize(H * p);
    qp.upper.resize(H * p);
    for (int k = 0; k < H; ++k) {
        qp.lower.segment(k * p, p) = spec.u_min;
        qp.upper.segment(k * p, p) = spec.u_max;
    }
    return qp;
}

QpSolution solve_box_qp(const Matrix& H, const Vector& f, const Vector& lower,
                        const Vector& upper, double tol, int max_iter) {
    const Eigen::Index d = H.rows();
    if (H.cols() != d || f.size() != d || lower.size() != d ||
        upper.size() != d) {
        throw ConfigError("solve_box_qp: dimension mismatch");
    }

    // Largest-eigenvalue bound by power iteration; any estimate above
    // lambda_max/2 keeps the 1/L step contractive.
    Vector v = Vector::Ones(d) / std::sqrt(static_cast<double>(d));
    double L = 1.0;
    for (int it = 0; it < 200; ++it) {
        Vector Hv = H * v;
        const double norm = Hv.norm();
        if (norm <= 0.0) break;
        const double estimate = v.dot(Hv);
        v = Hv / norm;
        if (it > 4 && std::abs(estimate - L) <= 1e-12 * std::abs(L)) {
            L = estimate;
            break;
        }
        L = estimate;
    }
    if (!(L > 0.0)) L = 1.0;

    auto project = [&](const Vector& x) -> Vector {
        return x.cwiseMax(lower).cwiseMin(upper);
    };

    QpSolution sol;
    Vector U = project(Vector::Zero(d));
    for (int it = 0; it < max_iter; ++it) {
        const Vector grad = H * U + f;
        const double residual = (U - project(U - grad)).cwiseAbs().maxCoeff();
        if (residual < tol) {
            sol.U = U;
            sol.iterations = it;
            sol.converged = true;
            return sol;
        }
        U = project(U - grad / L);
    }
    sol.U = U;
    sol.iterations = max_iter;
    sol.converged = false;
    return sol;
}

Vector mpc_step(const WeightedModel& wm, const StateLift& lift,
                const MpcSpec& spec, const Vector& x, double t, double dt) {
    const QpProblem qp = build_mpc_qp(wm, spec, lift.evaluate(x), t, dt);
    const QpSolution sol = solve_box_qp(qp.H, qp.f, qp.lower, qp.upper);
    return sol.U.head(wm.B.cols());
}

namespace {

ClosedLoopResult run_closed_loop(
    const SystemSpec& system, const Vector& x0, int steps,
    const std::function<Vector(const Vector&, double)>& policy,
    const ReferenceFn* reference) {
    ClosedLoopResult result;
    result.trajectory.states.push_back(x0);
    Vector x = x0;
    for (int k = 0; k < steps; ++k) {
        const double t = k * system.dt;
        const Vector u = policy(x, t);
        x = euler_step(
            [&system](const Vector& xs, const Vector& us) {
                return system.rhs(xs, us);
            },
            x, u, system.dt);
        if (!x.allFinite()) {
            std::ostringstream msg;
            msg << "closed_loop: plant diverged at step " << k + 1;
            throw NumericError(msg.str());
        }
        result.trajectory.inputs.push_back(u);
        result.trajectory.states.push_back(x);
        result.times.push_back(t);
        result.input_energy += system.dt * u.squaredNorm();
        if (reference) {
            const double t_next = (k + 1) * system.dt;
            result.tracking_error.push_back(x[0] - (*reference)(t_next)[0]);
        }
    }
    result.times.push_back(steps * system.dt);
    result.final_state_norm = x.norm();
    return result;
}

}  // namespace

ClosedLoopResult closed_loop_lqr(const SystemSpec& system,
                                 const LqrController& controller,
                                 const StateLift& lift, const Vector& x0,
                                 int steps) {
    return run_closed_loop(
        system, x0, steps,
        [&](const Vector& x, double) -> Vector {
            return -controller.K * lift.evaluate(x);
        },
        nullptr);
}

ClosedLoopResult closed_loop_mpc(const SystemSpec& system,
                                 const WeightedModel& wm, const StateLift& lift,
                                 const MpcSpec& spec, const Vector& x0,
                                 int steps) {
    return run_closed_loop(
        system, x0, steps,
        [&](const Vector& x, double t) -> Vector {
            return mpc_step(wm, lift, spec, x, t, system.dt);
        },
        &spec.reference);
}

}  // namespace kma
