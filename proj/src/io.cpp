#include "kma/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kma/errors.hpp"

namespace kma::io {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

json matrix_to_json(const Matrix& M) {
    json j;
    j["rows"] = M.rows();
    j["cols"] = M.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(M.size()));
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        for (Eigen::Index c = 0; c < M.cols(); ++c) data.push_back(M(r, c));
    }
    j["data"] = data;
    return j;
}

Matrix matrix_from_json(const json& j) {
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw IoError("matrix_from_json: data length does not match dims");
    }
    Matrix M(rows, cols);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = data[i++];
    }
    return M;
}

json vector_to_json(const Vector& v) {
    std::vector<double> data(v.data(), v.data() + v.size());
    return json(data);
}

Vector vector_from_json(const json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(data.data(),
                                    static_cast<Eigen::Index>(data.size()));
}

json feature_map_to_json(const StateLift& lift) {
    json j;
    if (const auto* mlp = dynamic_cast<const MlpFeatureMap*>(&lift)) {
        j["kind"] = "mlp";
        j["n"] = mlp->state_dim();
        j["n_extra"] = mlp->n_extra();
        j["activation"] = to_string(mlp->activation());
        json layers = json::array();
        for (const auto& layer : mlp->layers()) {
            json jl;
            jl["rows"] = layer.W.rows();
            jl["cols"] = layer.W.cols();
            std::vector<double> w;
            for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
                for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
                    w.push_back(layer.W(r, c));
                }
            }
            jl["w"] = w;
            jl["b"] = std::vector<double>(layer.b.data(),
                                          layer.b.data() + layer.b.size());
            layers.push_back(jl);
        }
        j["layers"] = layers;
    } else if (const auto* mono = dynamic_cast<const MonomialFeatureMap*>(&lift)) {
        j["kind"] = "monomials";
        j["n"] = mono->state_dim();
        j["max_degree"] = mono->max_degree();
    } else {
        j["kind"] = "identity";
        j["n"] = lift.state_dim();
    }
    return j;
}

std::shared_ptr<StateLift> feature_map_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "mlp") {
        const int n = j.at("n").get<int>();
        const int n_extra = j.at("n_extra").get<int>();
        const Activation act =
            activation_from_string(j.at("activation").get<std::string>());
        std::vector<MlpFeatureMap::Layer> layers;
        for (const auto& jl : j.at("layers")) {
            MlpFeatureMap::Layer layer;
            const Eigen::Index rows = jl.at("rows").get<Eigen::Index>();
            const Eigen::Index cols = jl.at("cols").get<Eigen::Index>();
            const auto w = jl.at("w").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(w.size()) != rows * cols) {
                throw IoError("feature_map: layer weight size mismatch");
            }
            layer.W.resize(rows, cols);
            std::size_t i = 0;
            for (Eigen::Index r = 0; r < rows; ++r) {
                for (Eigen::Index c = 0; c < cols; ++c) layer.W(r, c) = w[i++];
            }
            const auto b = jl.at("b").get<std::vector<double>>();
            layer.b = Eigen::Map<const Vector>(
                b.data(), static_cast<Eigen::Index>(b.size()));
            layers.push_back(std::move(layer));
        }
        return std::make_shared<MlpFeatureMap>(n, n_extra, act,
                                               std::move(layers));
    }
    if (kind == "monomials") {
        return std::make_shared<MonomialFeatureMap>(
            j.at("n").get<int>(), j.at("max_degree").get<int>());
    }
    if (kind == "identity") {
        return std::make_shared<IdentityFeatureMap>(j.at("n").get<int>());
    }
    throw IoError("feature_map: unknown kind '" + kind + "'");
}

json noise_to_json(const GaussianNoiseModel& noise) {
    json j;
    j["sigma_x"] = vector_to_json(noise.sigma_x);
    j["sigma_z"] = vector_to_json(noise.sigma_z);
    return j;
}

GaussianNoiseModel noise_from_json(const json& j) {
    GaussianNoiseModel noise;
    noise.sigma_x = vector_from_json(j.at("sigma_x"));
    noise.sigma_z = vector_from_json(j.at("sigma_z"));
    return noise;
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("failed to parse " + path.string() + ": " + e.what());
    }
    return j;
}

void dump_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed while writing " + path.string());
}

}  // namespace

void save_model(const fs::path& path, const LinearEmbeddingModel& model,
                const StateLift& lift) {
    json j;
    j["kind"] = "linear_embedding";
    j["A"] = matrix_to_json(model.A);
    j["B"] = matrix_to_json(model.B);
    j["C"] = matrix_to_json(model.C);
    j["sigma_x"] = vector_to_json(model.noise.sigma_x);
    j["sigma_z"] = vector_to_json(model.noise.sigma_z);
    j["feature_map"] = feature_map_to_json(lift);
    dump_json_file(path, j);
}

void save_weighted_model(const fs::path& path, const WeightedModel& wm,
                         const ModelEnsemble& ensemble, const StateLift& lift) {
    Matrix C_bar = Matrix::Zero(ensemble.members.front().C.rows(),
                                ensemble.members.front().C.cols());
    Vector sigma_x = Vector::Zero(ensemble.members.front().noise.sigma_x.size());
    Vector sigma_z = Vector::Zero(ensemble.members.front().noise.sigma_z.size());
    for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
        C_bar += wm.w[static_cast<Eigen::Index>(i)] * ensemble.members[i].C;
        sigma_x += wm.w[static_cast<Eigen::Index>(i)] *
                   ensemble.members[i].noise.sigma_x;
        sigma_z += wm.w[static_cast<Eigen::Index>(i)] *
                   ensemble.members[i].noise.sigma_z;
    }
    json j;
    j["kind"] = "weighted";
    j["A"] = matrix_to_json(wm.A);
    j["B"] = matrix_to_json(wm.B);
    j["C"] = matrix_to_json(C_bar);
    j["CA"] = matrix_to_json(wm.CA);
    j["CB"] = matrix_to_json(wm.CB);
    j["w"] = vector_to_json(wm.w);
    j["sigma_x"] = vector_to_json(sigma_x);
    j["sigma_z"] = vector_to_json(sigma_z);
    j["feature_map"] = feature_map_to_json(lift);
    dump_json_file(path, j);
}

WeightedModel ModelFile::as_weighted() const {
    if (kind == Kind::weighted) return weighted;
    return weighted_from_single(model);
}

ModelFile load_model(const fs::path& path) {
    const json j = load_json_file(path);
    ModelFile file;
    file.lift = feature_map_from_json(j.at("feature_map"));
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "linear_embedding") {
        file.kind = ModelFile::Kind::linear_embedding;
        file.model.A = matrix_from_json(j.at("A"));
        file.model.B = matrix_from_json(j.at("B"));
        file.model.C = matrix_from_json(j.at("C"));
        file.model.noise = noise_from_json(j);
        file.C = file.model.C;
    } else if (kind == "weighted") {
        file.kind = ModelFile::Kind::weighted;
        file.weighted.A = matrix_from_json(j.at("A"));
        file.weighted.B = matrix_from_json(j.at("B"));
        file.weighted.CA = matrix_from_json(j.at("CA"));
        file.weighted.CB = matrix_from_json(j.at("CB"));
        file.weighted.w = vector_from_json(j.at("w"));
        file.C = matrix_from_json(j.at("C"));
    } else {
        throw IoError(path.string() + ": unknown model kind '" + kind + "'");
    }
    return file;
}

std::shared_ptr<StateLift> feature_map_from_json_file(const fs::path& path) {
    return feature_map_from_json(load_json_file(path));
}

void save_dataset_csv(const fs::path& path, const Dataset& dataset) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "traj_id,step,partition";
    for (int d = 0; d < dataset.system.n; ++d) out << ",x" << d;
    for (int d = 0; d < dataset.system.p; ++d) out << ",u" << d;
    out << "\n";
    for (const auto& rec : dataset.trajectories) {
        const auto& t = rec.traj;
        for (std::size_t k = 0; k < t.states.size(); ++k) {
            out << rec.traj_id << "," << k << "," << rec.partition;
            for (int d = 0; d < dataset.system.n; ++d) {
                out << "," << format_double(t.states[k][d]);
            }
            // The final row of a trajectory has no input; keep the column
            // count fixed with zero placeholders (ignored on load).
            for (int d = 0; d < dataset.system.p; ++d) {
                out << ","
                    << format_double(k < t.inputs.size() ? t.inputs[k][d] : 0.0);
            }
            out << "\n";
        }
    }
    if (!out) throw IoError("failed while writing " + path.string());
}

void save_dataset_meta(const fs::path& path, const Dataset& dataset) {
    json j;
    json sys;
    sys["name"] = to_string(dataset.system.name);
    sys["n"] = dataset.system.n;
    sys["p"] = dataset.system.p;
    sys["dt"] = dataset.system.dt;
    sys["params"] = dataset.system.params;
    j["system"] = sys;
    j["seed"] = dataset.seed;
    json plan = json::array();
    for (const auto& part : dataset.plan.parts) {
        plan.push_back({{"label", part.label},
                        {"n_traj", part.n_traj},
                        {"traj_len", part.traj_len}});
    }
    j["plan"] = plan;
    j["ic_low"] = dataset.plan.ic_low;
    j["ic_high"] = dataset.plan.ic_high;
    j["u_low"] = dataset.plan.u_low;
    j["u_high"] = dataset.plan.u_high;
    j["integrator"] =
        dataset.plan.integrator == Integrator::rk4 ? "rk4" : "euler";
    dump_json_file(path, j);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
        } else if (ch == ',' && !quoted) {
            fields.push_back(field);
            field.clear();
        } else {
            field.push_back(ch);
        }
    }
    fields.push_back(field);
    return fields;
}

}  // namespace

Dataset load_dataset(const fs::path& csv_path, const fs::path& meta_path) {
    const json meta = load_json_file(meta_path);
    Dataset ds;
    const auto& sys = meta.at("system");
    const std::string name = sys.at("name").get<std::string>();
    if (name == "duffing") {
        ds.system = make_duffing(sys.at("dt").get<double>());
    } else if (name == "cartpole") {
        ds.system = make_cartpole(sys.at("dt").get<double>());
        ds.system.params = sys.at("params")
                               .get<std::map<std::string, double>>();
    } else {
        throw IoError("load_dataset: cannot reconstruct custom systems");
    }
    ds.seed = meta.at("seed").get<std::uint64_t>();
    for (const auto& part : meta.at("plan")) {
        ds.plan.parts.push_back({part.at("label").get<std::string>(),
                                 part.at("n_traj").get<int>(),
                                 part.at("traj_len").get<int>()});
    }
    ds.plan.ic_low = meta.at("ic_low").get<double>();
    ds.plan.ic_high = meta.at("ic_high").get<double>();
    ds.plan.u_low = meta.at("u_low").get<double>();
    ds.plan.u_high = meta.at("u_high").get<double>();
    ds.plan.integrator = meta.at("integrator").get<std::string>() == "rk4"
                             ? Integrator::rk4
                             : Integrator::euler;

    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open " + csv_path.string());
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError(csv_path.string() + ": missing header row");
    }
    const int n = ds.system.n;
    const int p = ds.system.p;
    TrajectoryRecord current;
    bool have_current = false;
    auto flush = [&]() {
        if (have_current) {
            // Drop the placeholder input of the terminal row.
            if (!current.traj.inputs.empty()) current.traj.inputs.pop_back();
            ds.trajectories.push_back(std::move(current));
            current = TrajectoryRecord{};
        }
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) != 3 + n + p) {
            throw IoError(csv_path.string() + ": unexpected column count");
        }
        const int traj_id = std::atoi(fields[0].c_str());
        if (!have_current || traj_id != current.traj_id) {
            flush();
            current.traj_id = traj_id;
            current.partition = fields[2];
            have_current = true;
        }
        Vector x(n);
        for (int d = 0; d < n; ++d) {
            x[d] = std::strtod(fields[3 + d].c_str(), nullptr);
        }
        Vector u(p);
        for (int d = 0; d < p; ++d) {
            u[d] = std::strtod(fields[3 + n + d].c_str(), nullptr);
        }
        current.traj.states.push_back(x);
        current.traj.inputs.push_back(u);
    }
    flush();
    return ds;
}

void save_train_report_csv(const fs::path& path, const TrainReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
        out << e << "," << format_double(report.train_loss[e]) << ","
            << format_double(report.val_loss[e]) << "\n";
    }
    if (!out) throw IoError("failed while writing " + path.string());
}

void save_weights_report(const fs::path& path, const Vector& elpds,
                         const Vector& w, std::size_t n_heldout) {
    json j;
    j["elpd"] = vector_to_json(elpds);
    j["w"] = vector_to_json(w);
    j["n_heldout"] = n_heldout;
    dump_json_file(path, j);
}

void save_prediction_csv(const fs::path& path,
                         const std::vector<Vector>& true_states,
                         const std::vector<Vector>& predicted_states,
                         const std::vector<Vector>& inputs, double dt) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    const int n = true_states.empty() ? 0 : static_cast<int>(true_states[0].size());
    const int p = inputs.empty() ? 0 : static_cast<int>(inputs[0].size());
    out << "step,t";
    for (int d = 0; d < n; ++d) out << ",x_true" << d;
    for (int d = 0; d < n; ++d) out << ",x_pred" << d;
    for (int d = 0; d < p; ++d) out << ",u" << d;
    out << "\n";
    for (std::size_t k = 0; k < predicted_states.size(); ++k) {
        out << k + 1 << "," << format_double((k + 1) * dt);
        for (int d = 0; d < n; ++d) {
            out << "," << format_double(true_states[k + 1][d]);
        }
        for (int d = 0; d < n; ++d) {
            out << "," << format_double(predicted_states[k][d]);
        }
        for (int d = 0; d < p; ++d) out << "," << format_double(inputs[k][d]);
        out << "\n";
    }
    if (!out) throw IoError("failed while writing " + path.string());
}

void save_closed_loop_csv(const fs::path& path, const ClosedLoopResult& result,
                          const ReferenceFn* reference) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    const auto& traj = result.trajectory;
    const int n = static_cast<int>(traj.states[0].size());
    const int p = traj.inputs.empty() ? 0 : static_cast<int>(traj.inputs[0].size());
    out << "t";
    for (int d = 0; d < n; ++d) out << ",x" << d;
    for (int d = 0; d < p; ++d) out << ",u" << d;
    if (reference) out << ",r";
    out << "\n";
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const double t = result.times[k];
        out << format_double(t);
        for (int d = 0; d < n; ++d) out << "," << format_double(traj.states[k][d]);
        for (int d = 0; d < p; ++d) {
            out << ","
                << format_double(k < traj.inputs.size() ? traj.inputs[k][d] : 0.0);
        }
        if (reference) out << "," << format_double((*reference)(t)[0]);
        out << "\n";
    }
    if (!out) throw IoError("failed while writing " + path.string());
}

void save_json(const fs::path& path, const std::string& serialized) {
    write_text_file(path, serialized);
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("failed while writing " + path.string());
}

}  // namespace kma::io
