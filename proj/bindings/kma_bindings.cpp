#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kma/averaging.hpp"
#include "kma/control.hpp"
#include "kma/dynamics.hpp"
#include "kma/edmd.hpp"
#include "kma/features.hpp"
#include "kma/training.hpp"

namespace py = pybind11;
using namespace kma;

PYBIND11_MODULE(_kma, m) {
    m.doc() = "Koopman model averaging: learn an ensemble of linear embedding "
              "models, merge them by pseudo-BMA weights, and use the weighted "
              "model for prediction, LQR, and MPC.";

    // ---- dynamics ----------------------------------------------------------
    py::class_<CartpoleParams>(m, "CartpoleParams")
        .def(py::init<>())
        .def_readwrite("m", &CartpoleParams::m)
        .def_readwrite("M", &CartpoleParams::M)
        .def_readwrite("L", &CartpoleParams::L)
        .def_readwrite("g", &CartpoleParams::g)
        .def_readwrite("delta", &CartpoleParams::delta);

    py::class_<SystemSpec>(m, "SystemSpec")
        .def_readonly("n", &SystemSpec::n)
        .def_readonly("p", &SystemSpec::p)
        .def_readwrite("dt", &SystemSpec::dt)
        .def("rhs", &SystemSpec::rhs, py::arg("x"), py::arg("u"));

    m.def("duffing_rhs", &duffing_rhs, py::arg("x"), py::arg("u"));
    m.def("cartpole_rhs", &cartpole_rhs, py::arg("x"), py::arg("u"),
          py::arg("params") = CartpoleParams{});
    m.def("make_duffing", &make_duffing, py::arg("dt") = 0.01);
    m.def("make_cartpole", &make_cartpole, py::arg("dt") = 0.01,
          py::arg("params") = CartpoleParams{});
    m.def("make_custom", &make_custom, py::arg("n"), py::arg("p"),
          py::arg("dt"), py::arg("rhs"));
    m.def("euler_step", &euler_step, py::arg("rhs"), py::arg("x"), py::arg("u"),
          py::arg("dt"));
    m.def("rk4_step", &rk4_step, py::arg("rhs"), py::arg("x"), py::arg("u"),
          py::arg("dt"));

    py::class_<Trajectory>(m, "Trajectory")
        .def_readonly("states", &Trajectory::states)
        .def_readonly("inputs", &Trajectory::inputs);

    py::class_<Sample>(m, "Sample")
        .def(py::init([](Vector x, Vector u, Vector y) {
                 return Sample{std::move(x), std::move(u), std::move(y)};
             }),
             py::arg("x"), py::arg("u"), py::arg("y"))
        .def_readonly("x", &Sample::x)
        .def_readonly("u", &Sample::u)
        .def_readonly("y", &Sample::y);

    m.def("simulate", &simulate, py::arg("system"), py::arg("x0"),
          py::arg("inputs"));

    py::class_<PartitionSpec>(m, "PartitionSpec")
        .def(py::init([](std::string label, int n_traj, int traj_len) {
                 return PartitionSpec{std::move(label), n_traj, traj_len};
             }),
             py::arg("label"), py::arg("n_traj"), py::arg("traj_len"))
        .def_readwrite("label", &PartitionSpec::label)
        .def_readwrite("n_traj", &PartitionSpec::n_traj)
        .def_readwrite("traj_len", &PartitionSpec::traj_len);

    py::class_<PartitionPlan>(m, "PartitionPlan")
        .def(py::init<>())
        .def_readwrite("parts", &PartitionPlan::parts)
        .def_readwrite("ic_low", &PartitionPlan::ic_low)
        .def_readwrite("ic_high", &PartitionPlan::ic_high)
        .def_readwrite("u_low", &PartitionPlan::u_low)
        .def_readwrite("u_high", &PartitionPlan::u_high);

    m.def("default_plan", &default_plan, py::arg("n_members") = 5);

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("seed", &Dataset::seed)
        .def("samples_for", &Dataset::samples_for, py::arg("partition"))
        .def("all_samples", &Dataset::all_samples)
        .def("partition_labels", &Dataset::partition_labels)
        .def("sample_count", &Dataset::sample_count, py::arg("partition"));

    m.def("generate_dataset", &generate_dataset, py::arg("system"),
          py::arg("plan"), py::arg("seed"));

    // ---- features ----------------------------------------------------------
    py::class_<StateLift, std::shared_ptr<StateLift>>(m, "StateLift")
        .def("state_dim", &StateLift::state_dim)
        .def("lift_dim", &StateLift::lift_dim)
        .def("evaluate", &StateLift::evaluate, py::arg("x"))
        .def("evaluate_batch", &StateLift::evaluate_batch, py::arg("X"));

    py::class_<MlpFeatureMap, StateLift, std::shared_ptr<MlpFeatureMap>>(
        m, "MlpFeatureMap")
        .def("n_extra", &MlpFeatureMap::n_extra)
        .def("params", &MlpFeatureMap::params)
        .def("set_params", &MlpFeatureMap::set_params, py::arg("theta"))
        .def("parameter_count", &MlpFeatureMap::parameter_count)
        .def("backward",
             [](const MlpFeatureMap& fm, const Vector& x, const Vector& up) {
                 return fm.backward(x, up).d_theta;
             },
             py::arg("x"), py::arg("upstream"));

    py::class_<IdentityFeatureMap, StateLift,
               std::shared_ptr<IdentityFeatureMap>>(m, "IdentityFeatureMap")
        .def(py::init<int>(), py::arg("n"));

    py::class_<MonomialFeatureMap, StateLift,
               std::shared_ptr<MonomialFeatureMap>>(m, "MonomialFeatureMap")
        .def(py::init<int, int>(), py::arg("n"), py::arg("max_degree"));

    m.def("init_features",
          [](int n, int n_extra, const std::vector<int>& hidden,
             const std::string& activation, std::uint64_t seed) {
              return std::make_shared<MlpFeatureMap>(init_features(
                  n, n_extra, hidden, activation_from_string(activation), seed));
          },
          py::arg("n"), py::arg("n_extra"), py::arg("hidden"),
          py::arg("activation") = "tanh", py::arg("seed") = 0);
    m.def("monomial_features", &monomial_features, py::arg("x"),
          py::arg("max_degree"));

    // ---- edmd --------------------------------------------------------------
    py::class_<GaussianNoiseModel>(m, "GaussianNoiseModel")
        .def_readonly("sigma_x", &GaussianNoiseModel::sigma_x)
        .def_readonly("sigma_z", &GaussianNoiseModel::sigma_z);

    py::class_<LinearEmbeddingModel>(m, "LinearEmbeddingModel")
        .def(py::init<>())
        .def_readwrite("A", &LinearEmbeddingModel::A)
        .def_readwrite("B", &LinearEmbeddingModel::B)
        .def_readwrite("C", &LinearEmbeddingModel::C)
        .def_readwrite("noise", &LinearEmbeddingModel::noise);

    m.def("least_squares",
          [](const Matrix& Phi, const Matrix& Y, double ridge, double rcond) {
              auto r = least_squares(Phi, Y, ridge, rcond);
              return py::make_tuple(r.W, r.rank, r.rank_deficient);
          },
          py::arg("Phi"), py::arg("Y"), py::arg("ridge") = 0.0,
          py::arg("rcond") = 1e-10);
    m.def("fit_dynamics",
          [](const StateLift& lift, const std::vector<Sample>& data,
             double ridge) {
              auto fit = fit_dynamics(lift, data, ridge);
              return py::make_tuple(fit.A, fit.B, fit.rank_deficient);
          },
          py::arg("lift"), py::arg("data"), py::arg("ridge") = 0.0);
    m.def("fit_decoder",
          [](const StateLift& lift, const std::vector<Sample>& data,
             double ridge) {
              auto fit = fit_decoder(lift, data, ridge);
              return py::make_tuple(fit.C, fit.rank_deficient);
          },
          py::arg("lift"), py::arg("data"), py::arg("ridge") = 0.0);
    m.def("fit_noise", &fit_noise, py::arg("model"), py::arg("lift"),
          py::arg("data"));
    m.def("identity_decoder", &identity_decoder, py::arg("n"),
          py::arg("lift_dim"));

    // ---- training ----------------------------------------------------------
    py::class_<FeatureSpec>(m, "FeatureSpec")
        .def(py::init<>())
        .def_readwrite("n_extra", &FeatureSpec::n_extra)
        .def_readwrite("hidden", &FeatureSpec::hidden);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("lambda1", &TrainConfig::lambda1)
        .def_readwrite("lambda2", &TrainConfig::lambda2)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("val_fraction", &TrainConfig::val_fraction)
        .def_readwrite("fix_decoder", &TrainConfig::fix_decoder);

    py::class_<TrainReport>(m, "TrainReport")
        .def_readonly("train_loss", &TrainReport::train_loss)
        .def_readonly("val_loss", &TrainReport::val_loss)
        .def_readonly("final_val_loss", &TrainReport::final_val_loss)
        .def_readonly("best_epoch", &TrainReport::best_epoch);

    m.def("problem1_loss", &problem1_loss, py::arg("fm"), py::arg("A"),
          py::arg("B"), py::arg("C"), py::arg("batch"), py::arg("lambda1"),
          py::arg("lambda2"));
    m.def("train_base_model",
          [](const Dataset& ds, const std::vector<std::string>& partitions,
             const FeatureSpec& features, const TrainConfig& config) {
              auto r = train_base_model(ds, partitions, features, config);
              return py::make_tuple(
                  std::make_shared<MlpFeatureMap>(std::move(r.fm)), r.model,
                  r.report);
          },
          py::arg("dataset"), py::arg("partitions"), py::arg("features"),
          py::arg("config"));

    // ---- averaging ---------------------------------------------------------
    py::class_<WeightedModel>(m, "WeightedModel")
        .def_readonly("A", &WeightedModel::A)
        .def_readonly("B", &WeightedModel::B)
        .def_readonly("CA", &WeightedModel::CA)
        .def_readonly("CB", &WeightedModel::CB)
        .def_readonly("w", &WeightedModel::w);

    py::class_<ModelEnsemble>(m, "ModelEnsemble")
        .def(py::init<>())
        .def_readwrite("members", &ModelEnsemble::members)
        .def_readonly("partitions", &ModelEnsemble::partitions);

    m.def("log_predictive_density", &log_predictive_density, py::arg("member"),
          py::arg("lift"), py::arg("sample"));
    m.def("elpd", &elpd, py::arg("member"), py::arg("lift"),
          py::arg("held_out"));
    m.def("pseudo_bma_weights", &pseudo_bma_weights, py::arg("elpds"));
    m.def("build_weighted_model", &build_weighted_model, py::arg("ensemble"),
          py::arg("w"));
    m.def("weighted_from_single", &weighted_from_single, py::arg("model"));
    m.def("advance_latent", &advance_latent, py::arg("wm"), py::arg("z"),
          py::arg("u"));
    m.def("predict_state", &predict_state, py::arg("wm"), py::arg("z"),
          py::arg("u"));
    m.def("rollout", &rollout, py::arg("wm"), py::arg("lift"), py::arg("x0"),
          py::arg("inputs"), py::arg("reencode") = false);

    py::class_<KmaResult>(m, "KmaResult")
        .def_readonly("fm", &KmaResult::fm)
        .def_readonly("ensemble", &KmaResult::ensemble)
        .def_readonly("elpds", &KmaResult::elpds)
        .def_readonly("w", &KmaResult::w)
        .def_readonly("weighted", &KmaResult::weighted)
        .def_readonly("train_report", &KmaResult::train_report);

    m.def("run_kma",
          [](const Dataset& ds, const FeatureSpec& features,
             const TrainConfig& config, double ridge) {
              KmaOptions options;
              options.ridge = ridge;
              return run_kma(ds, features, config, options);
          },
          py::arg("dataset"), py::arg("features"), py::arg("config"),
          py::arg("ridge") = 0.0);

    // ---- control -----------------------------------------------------------
    py::class_<LqrController>(m, "LqrController")
        .def_readonly("K", &LqrController::K)
        .def_readonly("P", &LqrController::P)
        .def_readonly("closed_loop_spectral_radius",
                      &LqrController::closed_loop_spectral_radius);

    m.def("lift_cost", &lift_cost, py::arg("Q_x"), py::arg("C"));
    m.def("solve_dare", &solve_dare, py::arg("A"), py::arg("B"), py::arg("Q_z"),
          py::arg("R"), py::arg("tol") = 1e-10, py::arg("max_iter") = 10000);
    m.def("lqr_gain", &lqr_gain, py::arg("A"), py::arg("B"), py::arg("Q_z"),
          py::arg("R"), py::arg("tol") = 1e-10, py::arg("max_iter") = 10000);
    m.def("solve_box_qp",
          [](const Matrix& H, const Vector& f, const Vector& lower,
             const Vector& upper, double tol, int max_iter) {
              auto sol = solve_box_qp(H, f, lower, upper, tol, max_iter);
              return py::make_tuple(sol.U, sol.iterations, sol.converged);
          },
          py::arg("H"), py::arg("f"), py::arg("lower"), py::arg("upper"),
          py::arg("tol") = 1e-8, py::arg("max_iter") = 20000);

    py::class_<MpcSpec>(m, "MpcSpec")
        .def(py::init<>())
        .def_readwrite("horizon", &MpcSpec::horizon)
        .def_readwrite("Q_x", &MpcSpec::Q_x)
        .def_readwrite("R", &MpcSpec::R)
        .def_readwrite("u_min", &MpcSpec::u_min)
        .def_readwrite("u_max", &MpcSpec::u_max)
        .def_readwrite("reference", &MpcSpec::reference)
        .def_readwrite("preview", &MpcSpec::preview);

    m.def("constant_reference", &constant_reference, py::arg("r"));
    m.def("step_reference", &step_reference, py::arg("n"), py::arg("lo"),
          py::arg("hi"), py::arg("t_switch"));
    m.def("mpc_step", &mpc_step, py::arg("wm"), py::arg("lift"), py::arg("spec"),
          py::arg("x"), py::arg("t"), py::arg("dt"));

    py::class_<ClosedLoopResult>(m, "ClosedLoopResult")
        .def_readonly("trajectory", &ClosedLoopResult::trajectory)
        .def_readonly("times", &ClosedLoopResult::times)
        .def_readonly("tracking_error", &ClosedLoopResult::tracking_error)
        .def_readonly("final_state_norm", &ClosedLoopResult::final_state_norm)
        .def_readonly("input_energy", &ClosedLoopResult::input_energy);

    m.def("closed_loop_lqr", &closed_loop_lqr, py::arg("system"),
          py::arg("controller"), py::arg("lift"), py::arg("x0"),
          py::arg("steps"));
    m.def("closed_loop_mpc", &closed_loop_mpc, py::arg("system"), py::arg("wm"),
          py::arg("lift"), py::arg("spec"), py::arg("x0"), py::arg("steps"));
}
