#ifndef KMA_CONTROL_HPP
#define KMA_CONTROL_HPP

#include <functional>
#include <memory>
#include <vector>

#include "kma/averaging.hpp"
#include "kma/dynamics.hpp"
#include "kma/features.hpp"

namespace kma {

struct LqrSpec {
    Matrix Q_x;  // n x n, symmetric PSD, weight on the decoded state
    Matrix R;    // p x p, symmetric PD
    double tol = 1e-10;
    int max_iter = 10000;
};

struct LqrController {
    Matrix K;  // p x N_x gain, control law u = -K g(x)
    Matrix P;  // DARE solution
    double closed_loop_spectral_radius = 0.0;
};

// Q_z = C^T Q_x C, symmetrized. Associates the state-space cost with the
// lifted coordinates through the linear decoder.
Matrix lift_cost(const Matrix& Q_x, const Matrix& C);

// Fixed-point iteration P <- Q_z + A'PA - A'PB (R + B'PB)^{-1} B'PA, started
// at P = Q_z, until the infinity-norm update falls below tol. Throws
// NumericError when the iteration fails to converge (non-stabilizable pair).
Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q_z,
                  const Matrix& R, double tol = 1e-10, int max_iter = 10000);

// K = (R + B'PB)^{-1} B'PA. Fails if the closed loop A - BK is not strictly
// stable.
LqrController lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q_z,
                       const Matrix& R, double tol = 1e-10, int max_iter = 10000);

// Residual of the DARE at P; < 1e-8 on every successful solve.
double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q_z,
                     const Matrix& R, const Matrix& P);

using ReferenceFn = std::function<Vector(double)>;

// Constant n-vector reference.
ReferenceFn constant_reference(const Vector& r);
// First component steps from lo to hi at t = t_switch (lo while t <= t_switch),
// other components zero.
ReferenceFn step_reference(int n, double lo, double hi, double t_switch);

struct MpcSpec {
    int horizon = 20;
    Matrix Q_x;      // n x n; zero rows/cols drop components from tracking
    Matrix R;        // p x p
    Vector u_min;    // p
    Vector u_max;    // p
    ReferenceFn reference;
    // When false (default) the reference is frozen at its current value over
    // the horizon; when true, future reference values are previewed.
    bool preview = false;
};

struct QpProblem {
    Matrix H;       // (H*p) x (H*p), PD
    Vector f;
    Vector lower;   // stacked bounds
    Vector upper;
};

// Condensed QP over the stacked input sequence U: latents advance by the
// averaged (A, B), decoded predictions use CA/CB, cost is
// sum_k (y_k - r_k)' Q_x (y_k - r_k) + u_k' R u_k in the form
// 1/2 U'HU + f'U.
QpProblem build_mpc_qp(const WeightedModel& wm, const MpcSpec& spec,
                       const Vector& z0, double t, double dt);

struct QpSolution {
    Vector U;
    int iterations = 0;
    bool converged = false;
};

// Projected gradient with fixed step 1/L, L from power iteration. Iterates
// stay inside the box exactly. Returns the best iterate with converged=false
// if max_iter is exhausted.
QpSolution solve_box_qp(const Matrix& H, const Vector& f, const Vector& lower,
                        const Vector& upper, double tol = 1e-8,
                        int max_iter = 20000);

// One receding-horizon step: encode the state, solve the QP, return the
// first input block.
Vector mpc_step(const WeightedModel& wm, const StateLift& lift,
                const MpcSpec& spec, const Vector& x, double t, double dt);

struct ClosedLoopResult {
    Trajectory trajectory;
    std::vector<double> times;
    std::vector<double> tracking_error;  // first tracked component, MPC only
    double final_state_norm = 0.0;
    double input_energy = 0.0;  // sum dt * ||u||^2
};

// LQR loop: u = -K g(x) from the true state, plant advanced by Euler.
ClosedLoopResult closed_loop_lqr(const SystemSpec& system,
                                 const LqrController& controller,
                                 const StateLift& lift, const Vector& x0,
                                 int steps);

// MPC loop against the true plant, receding horizon.
ClosedLoopResult closed_loop_mpc(const SystemSpec& system,
                                 const WeightedModel& wm, const StateLift& lift,
                                 const MpcSpec& spec, const Vector& x0,
                                 int steps);

}  // namespace kma

#endif
