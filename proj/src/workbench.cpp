#include "kma/workbench.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "kma/control.hpp"
#include "kma/errors.hpp"

namespace kma::workbench {

using nlohmann::json;

namespace {

void ensure_out_dir(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out.string());
}

void echo_config(const ExperimentConfig& cfg, const fs::path& out) {
    if (!cfg.raw_text.empty()) {
        io::write_text_file(out / "config.toml", cfg.raw_text);
    }
}

Dataset load_run_dataset(const fs::path& out) {
    const fs::path csv = out / "dataset.csv";
    const fs::path meta = out / "dataset_meta.json";
    if (!fs::exists(csv) || !fs::exists(meta)) {
        throw IoError("dataset not found under " + out.string() +
                      " (run gen-data first)");
    }
    return io::load_dataset(csv, meta);
}

Vector sized_or(const std::vector<double>& values, int n, double fill) {
    if (values.empty()) return Vector::Constant(n, fill);
    if (static_cast<int>(values.size()) != n) {
        throw ConfigError("vector length mismatch: expected " +
                          std::to_string(n) + " entries");
    }
    return Eigen::Map<const Vector>(values.data(), n);
}

Matrix diag_from(const std::vector<double>& values, int n, double fill) {
    return sized_or(values, n, fill).asDiagonal();
}

}  // namespace

void cmd_gen_data(const ExperimentConfig& cfg, const fs::path& out) {
    ensure_out_dir(out);
    const Dataset ds = generate_dataset(cfg.system, cfg.plan, cfg.seed);
    io::save_dataset_csv(out / "dataset.csv", ds);
    io::save_dataset_meta(out / "dataset_meta.json", ds);
    echo_config(cfg, out);
    std::size_t total = 0;
    for (const auto& label : ds.partition_labels()) {
        total += ds.sample_count(label);
    }
    std::cout << "gen-data: wrote " << ds.trajectories.size()
              << " trajectories (" << total << " samples) to " << out.string()
              << "\n";
}

void cmd_run(const ExperimentConfig& cfg, const fs::path& out) {
    ensure_out_dir(out);
    const Dataset ds = load_run_dataset(out);
    const KmaResult result = run_kma(ds, cfg.features, cfg.train, cfg.kma);

    io::save_model(out / "base_model.json", result.ensemble.members[0],
                   *result.fm);
    for (std::size_t i = 1; i < result.ensemble.members.size(); ++i) {
        std::ostringstream name;
        name << "member_" << (i < 9 ? "0" : "") << i + 1 << ".json";
        io::save_model(out / name.str(), result.ensemble.members[i], *result.fm);
    }
    io::save_weighted_model(out / "weighted_model.json", result.weighted,
                            result.ensemble, *result.fm);
    io::save_weights_report(out / "weights.json", result.elpds, result.w,
                            result.n_heldout);
    io::save_train_report_csv(out / "train_report.csv", result.train_report);
    echo_config(cfg, out);

    std::cout << "run: N=" << result.ensemble.members.size()
              << " members, base validation loss "
              << io::format_double(result.train_report.final_val_loss)
              << " (epoch " << result.train_report.best_epoch << ", "
              << result.train_report.wall_time_seconds << " s), weights [";
    for (Eigen::Index i = 0; i < result.w.size(); ++i) {
        std::cout << (i ? ", " : "") << io::format_double(result.w[i]);
    }
    std::cout << "]\n";
}

void cmd_baselines(const ExperimentConfig& cfg, const fs::path& out) {
    ensure_out_dir(out);
    const Dataset ds = load_run_dataset(out);
    const auto all = ds.all_samples();
    if (all.empty()) throw ConfigError("baselines: dataset is empty");

    // EDMD baseline on the fixed monomial dictionary.
    MonomialFeatureMap monomials(ds.system.n, 2);
    LinearEmbeddingModel edmd_model;
    DynamicsFit dyn = fit_dynamics(monomials, all, cfg.kma.ridge);
    edmd_model.A = std::move(dyn.A);
    edmd_model.B = std::move(dyn.B);
    edmd_model.C = fit_decoder(monomials, all, cfg.kma.ridge).C;
    edmd_model.noise = fit_noise(edmd_model, monomials, all);
    io::save_model(out / "edmd_baseline.json", edmd_model, monomials);

    // Normal NN model: Problem 1 on the entire data set.
    TrainResult nn = train_base_model(ds, ds.partition_labels(), cfg.features,
                                      cfg.train);
    io::save_model(out / "normal_nn.json", nn.model, nn.fm);
    io::save_train_report_csv(out / "normal_nn_train_report.csv", nn.report);
    echo_config(cfg, out);

    std::cout << "baselines: EDMD dictionary dim " << monomials.lift_dim()
              << ", normal NN validation loss "
              << io::format_double(nn.report.final_val_loss) << "\n";
}

PredictMetrics cmd_predict(const ExperimentConfig& cfg, const fs::path& out,
                           const PredictArgs& args) {
    ensure_out_dir(out);
    const io::ModelFile model = io::load_model(args.model_path);
    if (model.lift->state_dim() != cfg.system.n) {
        throw ConfigError("predict: model state dim " +
                          std::to_string(model.lift->state_dim()) +
                          " does not match system n=" +
                          std::to_string(cfg.system.n));
    }
    if (args.x0.size() != cfg.system.n) {
        throw ConfigError("predict: x0 must have length " +
                          std::to_string(cfg.system.n));
    }

    std::vector<Vector> inputs;
    if (args.input_file) {
        std::ifstream in(*args.input_file);
        if (!in) throw IoError("cannot open " + args.input_file->string());
        std::string line;
        if (!std::getline(in, line)) {
            throw IoError(args.input_file->string() + ": missing header");
        }
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ss(line);
            Vector u(cfg.system.p);
            std::string field;
            for (int d = 0; d < cfg.system.p; ++d) {
                if (!std::getline(ss, field, ',')) {
                    throw IoError(args.input_file->string() +
                                  ": too few input columns");
                }
                u[d] = std::strtod(field.c_str(), nullptr);
            }
            inputs.push_back(u);
        }
    } else {
        Vector u = args.u_const;
        if (u.size() == 0) u = Vector::Zero(cfg.system.p);
        if (u.size() != cfg.system.p) {
            throw ConfigError("predict: constant input must have length " +
                              std::to_string(cfg.system.p));
        }
        inputs.assign(static_cast<std::size_t>(std::max(args.steps, 0)), u);
    }

    PredictMetrics metrics;
    std::vector<Vector> true_states{args.x0};
    std::vector<Vector> predicted;
    if (!inputs.empty()) {
        const Trajectory truth = simulate(cfg.system, args.x0, inputs);
        true_states = truth.states;
        predicted = rollout(model.as_weighted(), *model.lift, args.x0, inputs);
        double acc = 0.0;
        for (std::size_t k = 0; k < predicted.size(); ++k) {
            const double sq =
                (predicted[k] - true_states[k + 1]).squaredNorm();
            metrics.rmse_per_step.push_back(
                std::sqrt(sq / static_cast<double>(cfg.system.n)));
            acc += sq;
        }
        metrics.total_rmse = std::sqrt(
            acc / static_cast<double>(predicted.size() * cfg.system.n));
        metrics.defined = true;
    }

    io::save_prediction_csv(out / "prediction.csv", true_states, predicted,
                            inputs, cfg.system.dt);
    json j;
    j["rmse_per_step"] = metrics.rmse_per_step;
    if (metrics.defined) {
        j["total_rmse"] = metrics.total_rmse;
    } else {
        j["total_rmse"] = nullptr;
    }
    j["steps"] = predicted.size();
    io::save_json(out / "prediction_metrics.json", j.dump(2) + "\n");

    if (metrics.defined) {
        std::cout << "predict: total RMSE "
                  << io::format_double(metrics.total_rmse) << " over "
                  << predicted.size() << " steps\n";
    } else {
        std::cout << "predict: total RMSE undefined (0 steps)\n";
    }
    return metrics;
}

void cmd_control(const ExperimentConfig& cfg, const fs::path& out,
                 const fs::path& model_path, const std::string& task) {
    if (task != "lqr" && task != "mpc") {
        throw ConfigError("control: unknown task '" + task +
                          "' (expected lqr or mpc)");
    }
    ensure_out_dir(out);
    const io::ModelFile model = io::load_model(model_path);
    if (model.lift->state_dim() != cfg.system.n) {
        throw ConfigError("control: model state dim does not match the system");
    }
    const WeightedModel wm = model.as_weighted();
    const int n = cfg.system.n;
    const int p = cfg.system.p;

    if (task == "lqr") {
        const Matrix Q_x = diag_from(cfg.lqr.q_diag, n, 1.0);
        const Matrix R = cfg.lqr.r * Matrix::Identity(p, p);
        const Matrix Q_z = lift_cost(Q_x, model.C);
        const LqrController ctrl = lqr_gain(wm.A, wm.B, Q_z, R);
        const Vector x0 = sized_or(cfg.lqr.x0, n, 0.0);
        const int steps =
            static_cast<int>(std::llround(cfg.lqr.t_final / cfg.system.dt));
        const ClosedLoopResult result =
            closed_loop_lqr(cfg.system, ctrl, *model.lift, x0, steps);
        io::save_closed_loop_csv(out / "closed_loop_lqr.csv", result, nullptr);
        json j;
        j["final_state_norm"] = result.final_state_norm;
        j["input_energy"] = result.input_energy;
        j["closed_loop_spectral_radius"] = ctrl.closed_loop_spectral_radius;
        io::save_json(out / "metrics_lqr.json", j.dump(2) + "\n");
        std::cout << "control lqr: final ||x|| "
                  << io::format_double(result.final_state_norm) << "\n";
        return;
    }

    MpcSpec spec;
    spec.horizon = cfg.mpc.horizon;
    Matrix Q_x = Matrix::Zero(n, n);
    Q_x(0, 0) = cfg.mpc.q1;  // track the first state component
    spec.Q_x = Q_x;
    spec.R = cfg.mpc.r * Matrix::Identity(p, p);
    spec.u_min = Vector::Constant(p, cfg.mpc.u_min);
    spec.u_max = Vector::Constant(p, cfg.mpc.u_max);
    spec.reference =
        step_reference(n, cfg.mpc.ref_lo, cfg.mpc.ref_hi, cfg.mpc.ref_switch);
    spec.preview = cfg.mpc.preview;
    const Vector x0 = sized_or(cfg.mpc.x0, n, 0.0);
    const int steps =
        static_cast<int>(std::llround(cfg.mpc.t_final / cfg.system.dt));
    const ClosedLoopResult result =
        closed_loop_mpc(cfg.system, wm, *model.lift, spec, x0, steps);
    io::save_closed_loop_csv(out / "closed_loop_mpc.csv", result,
                             &spec.reference);
    double tracking_sq = 0.0;
    double max_abs = 0.0;
    for (double e : result.tracking_error) {
        tracking_sq += e * e;
        max_abs = std::max(max_abs, std::abs(e));
    }
    json j;
    j["tracking_rmse"] = result.tracking_error.empty()
                             ? 0.0
                             : std::sqrt(tracking_sq /
                                         result.tracking_error.size());
    j["tracking_max_abs_error"] = max_abs;
    j["input_energy"] = result.input_energy;
    io::save_json(out / "metrics_mpc.json", j.dump(2) + "\n");
    std::cout << "control mpc: tracking RMSE "
              << io::format_double(j["tracking_rmse"].get<double>()) << "\n";
}

void cmd_report(const fs::path& out) {
    if (!fs::exists(out)) {
        throw IoError("report: output directory " + out.string() +
                      " does not exist");
    }
    json summary;
    auto maybe_load = [&](const char* file) -> std::optional<json> {
        const fs::path path = out / file;
        if (!fs::exists(path)) return std::nullopt;
        std::ifstream in(path);
        json j;
        in >> j;
        return j;
    };

    if (auto weights = maybe_load("weights.json")) {
        summary["weights"] = *weights;
        std::cout << "weights: " << weights->at("w").dump() << "\n";
        std::cout << "elpd:    " << weights->at("elpd").dump() << "\n";
    }
    for (const char* file : {"metrics_lqr.json", "metrics_mpc.json",
                             "prediction_metrics.json"}) {
        if (auto metrics = maybe_load(file)) {
            std::string key = file;
            key = key.substr(0, key.size() - 5);
            summary[key] = *metrics;
            std::cout << key << ": " << metrics->dump() << "\n";
        }
    }
    const fs::path train_csv = out / "train_report.csv";
    if (fs::exists(train_csv)) {
        std::ifstream in(train_csv);
        std::string line, last;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (!line.empty()) last = line;
        }
        if (!last.empty()) {
            summary["train_last_epoch"] = last;
            std::cout << "train (last epoch): " << last << "\n";
        }
    }
    io::save_json(out / "summary.json", summary.dump(2) + "\n");
    std::cout << "report: wrote " << (out / "summary.json").string() << "\n";
}

}  // namespace kma::workbench
