#include "kma/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kma/errors.hpp"
#include "kma/rng.hpp"

namespace kma {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

bool looks_like_int(const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

ConfigTree::Value parse_scalar(const std::string& token,
                               const std::string& where) {
    if (token.size() >= 2 && token.front() == '"' && token.back() == '"') {
        return token.substr(1, token.size() - 2);
    }
    if (token == "true") return true;
    if (token == "false") return false;
    if (looks_like_int(token)) {
        return static_cast<std::int64_t>(std::strtoll(token.c_str(), nullptr, 10));
    }
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') {
        throw ConfigError(where + ": cannot parse value '" + token + "'");
    }
    return v;
}

}  // namespace

ConfigTree ConfigTree::parse_string(const std::string& text,
                                    const std::string& origin) {
    ConfigTree tree;
    tree.raw_text_ = text;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        const std::string where =
            origin + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(where + ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError(where + ": empty section name");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError(where + ": expected key = value");
        }
        const std::string full_key = section.empty() ? key : section + "." + key;

        if (value.front() == '[') {
            if (value.back() != ']') {
                throw ConfigError(where + ": malformed array value");
            }
            std::vector<double> numbers;
            std::vector<std::string> strings;
            bool any_string = false;
            std::string body = value.substr(1, value.size() - 2);
            std::istringstream items(body);
            std::string item;
            while (std::getline(items, item, ',')) {
                item = trim(item);
                if (item.empty()) continue;
                Value v = parse_scalar(item, where);
                if (std::holds_alternative<std::string>(v)) {
                    any_string = true;
                    strings.push_back(std::get<std::string>(v));
                } else if (std::holds_alternative<std::int64_t>(v)) {
                    numbers.push_back(
                        static_cast<double>(std::get<std::int64_t>(v)));
                } else if (std::holds_alternative<double>(v)) {
                    numbers.push_back(std::get<double>(v));
                } else {
                    throw ConfigError(where + ": unsupported array element");
                }
            }
            if (any_string) {
                tree.values_[full_key] = strings;
            } else {
                tree.values_[full_key] = numbers;
            }
        } else {
            tree.values_[full_key] = parse_scalar(value, where);
        }
    }
    return tree;
}

ConfigTree ConfigTree::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path.string());
}

bool ConfigTree::has(const std::string& key) const {
    return values_.count(key) > 0;
}

std::int64_t ConfigTree::get_int(const std::string& key,
                                 std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const auto* v = std::get_if<std::int64_t>(&it->second)) return *v;
    throw ConfigError(key + ": expected an integer");
}

double ConfigTree::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const auto* v = std::get_if<double>(&it->second)) return *v;
    if (const auto* v = std::get_if<std::int64_t>(&it->second)) {
        return static_cast<double>(*v);
    }
    throw ConfigError(key + ": expected a number");
}

bool ConfigTree::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const auto* v = std::get_if<bool>(&it->second)) return *v;
    throw ConfigError(key + ": expected true or false");
}

std::string ConfigTree::get_string(const std::string& key,
                                   const std::string& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const auto* v = std::get_if<std::string>(&it->second)) return *v;
    throw ConfigError(key + ": expected a string");
}

std::vector<double> ConfigTree::get_double_array(
    const std::string& key, const std::vector<double>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const auto* v = std::get_if<std::vector<double>>(&it->second)) return *v;
    if (const auto* v = std::get_if<double>(&it->second)) return {*v};
    if (const auto* v = std::get_if<std::int64_t>(&it->second)) {
        return {static_cast<double>(*v)};
    }
    throw ConfigError(key + ": expected an array of numbers");
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    return from_tree(ConfigTree::parse_file(path));
}

ExperimentConfig ExperimentConfig::from_tree(const ConfigTree& tree) {
    ExperimentConfig cfg;
    cfg.raw_text = tree.raw_text();

    const std::string name = tree.get_string("system.name", "duffing");
    const double dt = tree.get_double("system.dt", 0.01);
    const SystemName sys_name = system_name_from_string(name);
    if (sys_name == SystemName::duffing) {
        cfg.system = make_duffing(dt);
        cfg.features.n_extra = 1;
        cfg.features.hidden = {10};
    } else if (sys_name == SystemName::cartpole) {
        CartpoleParams params;
        params.m = tree.get_double("system.m", params.m);
        params.M = tree.get_double("system.M", params.M);
        params.L = tree.get_double("system.L", params.L);
        params.g = tree.get_double("system.g", params.g);
        params.delta = tree.get_double("system.delta", params.delta);
        cfg.system = make_cartpole(dt, params);
        cfg.features.n_extra = 8;
        cfg.features.hidden = {10, 10};
    } else {
        throw ConfigError("system.name: custom systems require the library API");
    }

    cfg.seed = static_cast<std::uint64_t>(tree.get_int("seed", 0));
    cfg.n_members = static_cast<int>(tree.get_int("data.n_members", 5));
    if (cfg.n_members < 1) throw ConfigError("data.n_members must be >= 1");

    const auto d1 = tree.get_double_array("data.d1", {300, 50});
    const auto di = tree.get_double_array("data.di", {100, 50});
    const auto da = tree.get_double_array("data.da", {50, 20});
    if (d1.size() != 2 || di.size() != 2 || da.size() != 2) {
        throw ConfigError("data.d1/di/da: expected [n_traj, traj_len]");
    }
    cfg.plan.parts.push_back(
        {"D1", static_cast<int>(d1[0]), static_cast<int>(d1[1])});
    for (int i = 2; i <= cfg.n_members; ++i) {
        cfg.plan.parts.push_back({"D" + std::to_string(i),
                                  static_cast<int>(di[0]),
                                  static_cast<int>(di[1])});
    }
    cfg.plan.parts.push_back(
        {"Da", static_cast<int>(da[0]), static_cast<int>(da[1])});
    cfg.plan.ic_low = tree.get_double("data.ic_low", -3.0);
    cfg.plan.ic_high = tree.get_double("data.ic_high", 3.0);
    cfg.plan.u_low = tree.get_double("data.u_low", -2.5);
    cfg.plan.u_high = tree.get_double("data.u_high", 2.5);
    const std::string integ = tree.get_string("data.integrator", "euler");
    if (integ == "euler") {
        cfg.plan.integrator = Integrator::euler;
    } else if (integ == "rk4") {
        cfg.plan.integrator = Integrator::rk4;
    } else {
        throw ConfigError("data.integrator: expected euler or rk4");
    }

    cfg.features.n_extra =
        static_cast<int>(tree.get_int("features.n_extra", cfg.features.n_extra));
    const auto hidden = tree.get_double_array(
        "features.hidden",
        std::vector<double>(cfg.features.hidden.begin(),
                            cfg.features.hidden.end()));
    cfg.features.hidden.clear();
    for (double h : hidden) cfg.features.hidden.push_back(static_cast<int>(h));
    cfg.features.activation = activation_from_string(
        tree.get_string("features.activation", "tanh"));

    cfg.train.lambda1 = tree.get_double("train.lambda1", 1.0);
    cfg.train.lambda2 = tree.get_double("train.lambda2", 1.0);
    cfg.train.lr = tree.get_double("train.lr", 1e-3);
    cfg.train.epochs = static_cast<int>(tree.get_int("train.epochs", 2000));
    cfg.train.batch_size =
        static_cast<int>(tree.get_int("train.batch_size", 256));
    cfg.train.optimizer =
        optimizer_from_string(tree.get_string("train.optimizer", "adam"));
    cfg.train.val_fraction = tree.get_double("train.val_fraction", 0.1);
    cfg.train.fix_decoder = tree.get_bool("train.fix_decoder", true);
    cfg.train_seed_explicit = tree.has("train.seed");
    cfg.train.seed = cfg.train_seed_explicit
                         ? static_cast<std::uint64_t>(tree.get_int("train.seed", 0))
                         : splitmix64(cfg.seed ^ 0x7261696EULL);

    cfg.kma.ridge = tree.get_double("edmd.ridge", 0.0);
    const std::string density = tree.get_string("kma.density", "state");
    if (density == "state") {
        cfg.kma.density = WeightDensity::state;
    } else if (density == "latent") {
        cfg.kma.density = WeightDensity::latent;
    } else {
        throw ConfigError("kma.density: expected state or latent");
    }

    cfg.lqr.q_diag = tree.get_double_array("lqr.q", {});
    cfg.lqr.r = tree.get_double("lqr.r", 0.1);
    cfg.lqr.t_final = tree.get_double("lqr.t_final", 10.0);
    cfg.lqr.x0 = tree.get_double_array("lqr.x0", {});

    cfg.mpc.horizon = static_cast<int>(tree.get_int("mpc.horizon", 20));
    cfg.mpc.q1 = tree.get_double("mpc.q1", 10.0);
    cfg.mpc.r = tree.get_double("mpc.r", 0.001);
    cfg.mpc.u_min = tree.get_double("mpc.u_min", -10.0);
    cfg.mpc.u_max = tree.get_double("mpc.u_max", 10.0);
    cfg.mpc.t_final = tree.get_double("mpc.t_final", 20.0);
    cfg.mpc.ref_lo = tree.get_double("mpc.ref_lo", -1.0);
    cfg.mpc.ref_hi = tree.get_double("mpc.ref_hi", 1.0);
    cfg.mpc.ref_switch = tree.get_double("mpc.ref_switch", 10.0);
    cfg.mpc.preview = tree.get_bool("mpc.preview", false);
    cfg.mpc.x0 = tree.get_double_array("mpc.x0", {});

    return cfg;
}

void ExperimentConfig::override_seed(std::uint64_t new_seed) {
    seed = new_seed;
    if (!train_seed_explicit) {
        train.seed = splitmix64(seed ^ 0x7261696EULL);
    }
}

}  // namespace kma
