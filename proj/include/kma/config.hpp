#ifndef KMA_CONFIG_HPP
#define KMA_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kma/averaging.hpp"
#include "kma/dynamics.hpp"
#include "kma/training.hpp"

namespace kma {

// Minimal TOML-style reader: [section] headers, key = value pairs, values
// are integers, floats, booleans, quoted strings, or flat arrays of those.
// Keys are exposed as "section.key".
class ConfigTree {
public:
    using Value = std::variant<std::int64_t, double, bool, std::string,
                               std::vector<double>, std::vector<std::string>>;

    static ConfigTree parse_file(const std::filesystem::path& path);
    static ConfigTree parse_string(const std::string& text,
                                   const std::string& origin = "<string>");

    bool has(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key,
                           const std::string& fallback) const;
    std::vector<double> get_double_array(
        const std::string& key, const std::vector<double>& fallback) const;

    const std::string& raw_text() const { return raw_text_; }

private:
    std::map<std::string, Value> values_;
    std::string raw_text_;
};

struct LqrTaskConfig {
    std::vector<double> q_diag;  // diagonal of Q_x; sized to n when empty
    double r = 0.1;
    double t_final = 10.0;
    std::vector<double> x0;  // defaults to the origin
};

struct MpcTaskConfig {
    int horizon = 20;
    double q1 = 10.0;   // weight on the tracked first component
    double r = 0.001;   // see README: larger values leave a steady-state offset
    double u_min = -10.0;
    double u_max = 10.0;
    double t_final = 20.0;
    double ref_lo = -1.0;
    double ref_hi = 1.0;
    double ref_switch = 10.0;
    bool preview = false;
    std::vector<double> x0;
};

// Everything a CLI run needs, parsed from one config file. The root seed
// drives dataset generation directly and the training seed by derivation
// unless [train] seed is given explicitly.
struct ExperimentConfig {
    SystemSpec system;
    PartitionPlan plan;
    int n_members = 5;
    std::uint64_t seed = 0;
    FeatureSpec features;
    TrainConfig train;
    KmaOptions kma;
    LqrTaskConfig lqr;
    MpcTaskConfig mpc;
    bool train_seed_explicit = false;
    std::string raw_text;  // original file contents, echoed for provenance

    static ExperimentConfig from_file(const std::filesystem::path& path);
    static ExperimentConfig from_tree(const ConfigTree& tree);

    // Applies a --seed override, re-deriving the training seed unless the
    // config pinned one explicitly.
    void override_seed(std::uint64_t seed);
};

}  // namespace kma

#endif
