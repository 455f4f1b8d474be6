#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <string>

#include "kma/config.hpp"
#include "kma/errors.hpp"
#include "kma/workbench.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitIo = 3;

kma::Vector parse_vector(const std::string& csv) {
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        const std::size_t comma = csv.find(',', pos);
        const std::string token =
            csv.substr(pos, comma == std::string::npos ? csv.size() - pos
                                                       : comma - pos);
        if (!token.empty()) {
            char* end = nullptr;
            const double v = std::strtod(token.c_str(), &end);
            if (end == token.c_str()) {
                throw kma::ConfigError("cannot parse number '" + token + "'");
            }
            values.push_back(v);
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return Eigen::Map<const kma::Vector>(values.data(),
                                         static_cast<Eigen::Index>(values.size()));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopman model averaging workbench"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string model_path;
    std::string task;
    std::string x0_csv;
    std::string u_csv;
    std::string u_file;
    int steps = 50;
    std::int64_t seed_override = -1;
    bool have_seed = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "Config file (TOML)");
        if (needs_config) opt->required();
        cmd->add_option("--out", out_dir, "Output directory");
        cmd->add_option("--seed", seed_override, "Root seed override")
            ->each([&](const std::string&) { have_seed = true; });
    };

    auto* gen = app.add_subcommand("gen-data", "Generate the benchmark dataset");
    add_common(gen, true);

    auto* run = app.add_subcommand("run", "Run Koopman model averaging end to end");
    add_common(run, true);

    auto* baselines =
        app.add_subcommand("baselines", "Train the EDMD and normal NN baselines");
    add_common(baselines, true);

    auto* predict = app.add_subcommand("predict", "Multi-step state prediction");
    add_common(predict, true);
    predict->add_option("--model", model_path, "Model file")->required();
    predict->add_option("--x0", x0_csv, "Initial state, comma separated")
        ->required();
    predict->add_option("--steps", steps, "Prediction horizon");
    predict->add_option("--u", u_csv, "Constant input, comma separated");
    predict->add_option("--u-file", u_file, "CSV file with input columns");

    auto* control = app.add_subcommand("control", "Closed-loop LQR or MPC");
    add_common(control, true);
    control->add_option("--model", model_path, "Model file")->required();
    control->add_option("--task", task, "lqr or mpc")->required();

    auto* report = app.add_subcommand("report", "Summarize an output directory");
    report->add_option("--out", out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (report->parsed()) {
            kma::workbench::cmd_report(out_dir);
            return kExitOk;
        }
        kma::ExperimentConfig cfg = kma::ExperimentConfig::from_file(config_path);
        if (have_seed) {
            cfg.override_seed(static_cast<std::uint64_t>(seed_override));
        }
        if (gen->parsed()) {
            kma::workbench::cmd_gen_data(cfg, out_dir);
        } else if (run->parsed()) {
            kma::workbench::cmd_run(cfg, out_dir);
        } else if (baselines->parsed()) {
            kma::workbench::cmd_baselines(cfg, out_dir);
        } else if (predict->parsed()) {
            kma::workbench::PredictArgs args;
            args.model_path = model_path;
            args.x0 = parse_vector(x0_csv);
            if (!u_file.empty()) args.input_file = u_file;
            if (!u_csv.empty()) args.u_const = parse_vector(u_csv);
            args.steps = steps;
            kma::workbench::cmd_predict(cfg, out_dir, args);
        } else if (control->parsed()) {
            kma::workbench::cmd_control(cfg, out_dir, model_path, task);
        }
        return kExitOk;
    } catch (const kma::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const kma::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const kma::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
}
