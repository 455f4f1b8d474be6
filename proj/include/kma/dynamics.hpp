#ifndef KMA_DYNAMICS_HPP
#define KMA_DYNAMICS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace kma {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class SystemName { duffing, cartpole, custom };

std::string to_string(SystemName name);
SystemName system_name_from_string(const std::string& s);

// Continuous-time right-hand sides of the two benchmark systems.
//
// Duffing oscillator with a control input:
//   x1' = x2,  x2' = -0.5 x2 + x1 - 4 x1^3 + u.
Vector duffing_rhs(const Vector& x, const Vector& u);

struct CartpoleParams {
    double m = 1.0;      // pole mass
    double M = 5.0;      // cart mass
    double L = 2.0;      // pole length
    double g = -10.0;    // gravity
    double delta = 1.0;  // cart damping
};

// Cartpole with A(x2,x3,x4) = m L x4^2 sin x3 - delta x2 and the shared
// denominator m L^2 (M + m (1 - cos^2 x3)). Throws NumericError when a
// custom parameter set makes the denominator vanish.
Vector cartpole_rhs(const Vector& x, const Vector& u,
                    const CartpoleParams& params = {});

// A benchmark system plus its sampling period. `custom` carries a
// user-supplied RHS hook and is not serializable.
struct SystemSpec {
    SystemName name = SystemName::duffing;
    int n = 2;
    int p = 1;
    std::map<std::string, double> params;  // cartpole: m, M, L, g, delta
    double dt = 0.01;
    std::function<Vector(const Vector&, const Vector&)> custom_rhs;

    Vector rhs(const Vector& x, const Vector& u) const;
    CartpoleParams cartpole_params() const;
};

SystemSpec make_duffing(double dt = 0.01);
SystemSpec make_cartpole(double dt = 0.01, const CartpoleParams& params = {});
SystemSpec make_custom(int n, int p, double dt,
                       std::function<Vector(const Vector&, const Vector&)> rhs);

using RhsFn = std::function<Vector(const Vector&, const Vector&)>;

// One explicit Euler step x + dt * rhs(x, u).
Vector euler_step(const RhsFn& rhs, const Vector& x, const Vector& u, double dt);

// Classic RK4 step with zero-order-hold input. Only used by dataset
// generation when explicitly requested; the benchmark data model is Euler.
Vector rk4_step(const RhsFn& rhs, const Vector& x, const Vector& u, double dt);

enum class Integrator { euler, rk4 };

struct Trajectory {
    std::vector<Vector> states;  // length T+1
    std::vector<Vector> inputs;  // length T
};

// One transition triple y = f(x, u).
struct Sample {
    Vector x;
    Vector u;
    Vector y;
};

// Rolls the system forward under the given input sequence. Throws
// NumericError naming the step index if the state leaves the finite range.
Trajectory simulate(const SystemSpec& system, const Vector& x0,
                    const std::vector<Vector>& inputs);

struct PartitionSpec {
    std::string label;  // "D1", ..., "DN", "Da"
    int n_traj = 0;
    int traj_len = 0;
};

struct PartitionPlan {
    std::vector<PartitionSpec> parts;
    double ic_low = -3.0;
    double ic_high = 3.0;
    double u_low = -2.5;
    double u_high = 2.5;
    Integrator integrator = Integrator::euler;
};

// D1 = 300x50, D2..DN = 100x50, Da = 50x20.
PartitionPlan default_plan(int n_members = 5);

struct TrajectoryRecord {
    std::string partition;
    int traj_id = 0;
    Trajectory traj;
};

struct Dataset {
    SystemSpec system;
    std::uint64_t seed = 0;
    PartitionPlan plan;
    std::vector<TrajectoryRecord> trajectories;

    // Transition triples of one partition, in trajectory order.
    std::vector<Sample> samples_for(const std::string& partition) const;
    std::vector<Sample> all_samples() const;
    std::vector<std::string> partition_labels() const;
    bool has_partition(const std::string& partition) const;
    std::size_t sample_count(const std::string& partition) const;
};

// Samples initial conditions from Uniform[ic_low, ic_high]^n and per-step
// inputs from Uniform[u_low, u_high]^p, then integrates. Deterministic for
// a given seed: every trajectory draws from its own derived RNG stream,
// independently of generation order.
Dataset generate_dataset(const SystemSpec& system, const PartitionPlan& plan,
                         std::uint64_t seed);

}  // namespace kma

#endif
