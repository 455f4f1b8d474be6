#include "kma/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "kma/errors.hpp"
#include "kma/rng.hpp"

namespace kma {

std::string to_string(SystemName name) {
    switch (name) {
        case SystemName::duffing: return "duffing";
        case SystemName::cartpole: return "cartpole";
        case SystemName::custom: return "custom";
    }
    return "unknown";
}

SystemName system_name_from_string(const std::string& s) {
    if (s == "duffing") return SystemName::duffing;
    if (s == "cartpole") return SystemName::cartpole;
    if (s == "custom") return SystemName::custom;
    throw ConfigError("system.name: unknown system '" + s +
                      "' (expected duffing|cartpole|custom)");
}

Vector duffing_rhs(const Vector& x, const Vector& u) {
    Vector dx(2);
    dx[0] = x[1];
    dx[1] = -0.5 * x[1] + x[0] - 4.0 * x[0] * x[0] * x[0] + u[0];
    return dx;
}

Vector cartpole_rhs(const Vector& x, const Vector& u, const CartpoleParams& p) {
    const double s3 = std::sin(x[2]);
    const double c3 = std::cos(x[2]);
    const double den = p.m * p.L * p.L * (p.M + p.m * (1.0 - c3 * c3));
    if (std::abs(den) < 1e-12) {
        throw NumericError("cartpole_rhs: degenerate denominator for the given parameters");
    }
    const double A = p.m * p.L * x[3] * x[3] * s3 - p.delta * x[1];
    Vector dx(4);
    dx[0] = x[1];
    dx[1] = (-p.m * p.m * p.L * p.L * p.g * c3 * s3 + p.m * p.L * p.L * A +
             p.m * p.L * p.L * u[0]) / den;
    dx[2] = x[3];
    dx[3] = ((p.m + p.M) * p.m * p.g * p.L * s3 - p.m * p.L * c3 * A +
             p.m * p.L * c3 * u[0]) / den;
    return dx;
}

CartpoleParams SystemSpec::cartpole_params() const {
    CartpoleParams p;
    auto get = [&](const char* key, double fallback) {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    p.m = get("m", p.m);
    p.M = get("M", p.M);
    p.L = get("L", p.L);
    p.g = get("g", p.g);
    p.delta = get("delta", p.delta);
    return p;
}

Vector SystemSpec::rhs(const Vector& x, const Vector& u) const {
    switch (name) {
        case SystemName::duffing: return duffing_rhs(x, u);
        case SystemName::cartpole: return cartpole_rhs(x, u, cartpole_params());
        case SystemName::custom: return custom_rhs(x, u);
    }
    throw ConfigError("SystemSpec: invalid system name");
}

SystemSpec make_duffing(double dt) {
    SystemSpec s;
    s.name = SystemName::duffing;
    s.n = 2;
    s.p = 1;
    s.dt = dt;
    return s;
}

SystemSpec make_cartpole(double dt, const CartpoleParams& params) {
    SystemSpec s;
    s.name = SystemName::cartpole;
    s.n = 4;
    s.p = 1;
    s.dt = dt;
    s.params = {{"m", params.m}, {"M", params.M}, {"L", params.L},
                {"g", params.g}, {"delta", params.delta}};
    return s;
}

SystemSpec make_custom(int n, int p, double dt,
                       std::function<Vector(const Vector&, const Vector&)> rhs) {
    SystemSpec s;
    s.name = SystemName::custom;
    s.n = n;
    s.p = p;
    s.dt = dt;
    s.custom_rhs = std::move(rhs);
    return s;
}

Vector euler_step(const RhsFn& rhs, const Vector& x, const Vector& u, double dt) {
    return x + dt * rhs(x, u);
}

Vector rk4_step(const RhsFn& rhs, const Vector& x, const Vector& u, double dt) {
    const Vector k1 = rhs(x, u);
    const Vector k2 = rhs(x + 0.5 * dt * k1, u);
    const Vector k3 = rhs(x + 0.5 * dt * k2, u);
    const Vector k4 = rhs(x + dt * k3, u);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace {

Vector integrate_step(const SystemSpec& system, Integrator integrator,
                      const Vector& x, const Vector& u) {
    auto rhs = [&system](const Vector& xs, const Vector& us) {
        return system.rhs(xs, us);
    };
    return integrator == Integrator::rk4 ? rk4_step(rhs, x, u, system.dt)
                                         : euler_step(rhs, x, u, system.dt);
}

}  // namespace

Trajectory simulate(const SystemSpec& system, const Vector& x0,
                    const std::vector<Vector>& inputs) {
    if (inputs.empty()) {
        throw ConfigError("simulate: input sequence must be nonempty");
    }
    Trajectory traj;
    traj.states.reserve(inputs.size() + 1);
    traj.inputs = inputs;
    traj.states.push_back(x0);
    Vector x = x0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        x = integrate_step(system, Integrator::euler, x, inputs[k]);
        if (!x.allFinite()) {
            std::ostringstream msg;
            msg << "simulate: state diverged at step " << k + 1;
            throw NumericError(msg.str());
        }
        traj.states.push_back(x);
    }
    return traj;
}

PartitionPlan default_plan(int n_members) {
    PartitionPlan plan;
    plan.parts.push_back({"D1", 300, 50});
    for (int i = 2; i <= n_members; ++i) {
        plan.parts.push_back({"D" + std::to_string(i), 100, 50});
    }
    plan.parts.push_back({"Da", 50, 20});
    return plan;
}

std::vector<Sample> Dataset::samples_for(const std::string& partition) const {
    std::vector<Sample> out;
    for (const auto& rec : trajectories) {
        if (rec.partition != partition) continue;
        const auto& t = rec.traj;
        for (std::size_t k = 0; k < t.inputs.size(); ++k) {
            out.push_back({t.states[k], t.inputs[k], t.states[k + 1]});
        }
    }
    return out;
}

std::vector<Sample> Dataset::all_samples() const {
    std::vector<Sample> out;
    for (const auto& label : partition_labels()) {
        auto part = samples_for(label);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

std::vector<std::string> Dataset::partition_labels() const {
    std::vector<std::string> labels;
    for (const auto& rec : trajectories) {
        bool seen = false;
        for (const auto& l : labels) seen = seen || (l == rec.partition);
        if (!seen) labels.push_back(rec.partition);
    }
    return labels;
}

bool Dataset::has_partition(const std::string& partition) const {
    for (const auto& rec : trajectories) {
        if (rec.partition == partition) return true;
    }
    return false;
}

std::size_t Dataset::sample_count(const std::string& partition) const {
    std::size_t count = 0;
    for (const auto& rec : trajectories) {
        if (rec.partition == partition) count += rec.traj.inputs.size();
    }
    return count;
}

Dataset generate_dataset(const SystemSpec& system, const PartitionPlan& plan,
                         std::uint64_t seed) {
    Dataset ds;
    ds.system = system;
    ds.seed = seed;
    ds.plan = plan;
    int traj_id = 0;
    for (std::size_t pi = 0; pi < plan.parts.size(); ++pi) {
        const auto& part = plan.parts[pi];
        const std::uint64_t pseed = partition_seed(seed, pi);
        for (int j = 0; j < part.n_traj; ++j) {
            Rng rng(trajectory_seed(pseed, static_cast<std::size_t>(j)));
            Vector x0(system.n);
            for (int d = 0; d < system.n; ++d) {
                x0[d] = rng.uniform(plan.ic_low, plan.ic_high);
            }
            TrajectoryRecord rec;
            rec.partition = part.label;
            rec.traj_id = traj_id++;
            rec.traj.states.push_back(x0);
            Vector x = x0;
            for (int k = 0; k < part.traj_len; ++k) {
                Vector u(system.p);
                for (int d = 0; d < system.p; ++d) {
                    u[d] = rng.uniform(plan.u_low, plan.u_high);
                }
                x = integrate_step(system, plan.integrator, x, u);
                if (!x.allFinite()) {
                    std::ostringstream msg;
                    msg << "generate_dataset: trajectory " << rec.traj_id
                        << " diverged at step " << k + 1;
                    throw NumericError(msg.str());
                }
                rec.traj.inputs.push_back(u);
                rec.traj.states.push_back(x);
            }
            ds.trajectories.push_back(std::move(rec));
        }
    }
    return ds;
}

}  // namespace kma
