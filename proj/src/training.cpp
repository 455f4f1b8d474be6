#include "kma/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "kma/errors.hpp"
#include "kma/rng.hpp"

namespace kma {

std::string to_string(OptimizerKind k) {
    return k == OptimizerKind::adam ? "adam" : "sgd";
}

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd") return OptimizerKind::sgd;
    throw ConfigError("train.optimizer: unknown optimizer '" + s + "'");
}

namespace {

struct BatchMatrices {
    Matrix X;
    Matrix U;
    Matrix Y;
};

BatchMatrices to_matrices(const std::vector<Sample>& samples) {
    BatchMatrices m;
    const Eigen::Index rows = static_cast<Eigen::Index>(samples.size());
    m.X.resize(rows, samples.front().x.size());
    m.U.resize(rows, samples.front().u.size());
    m.Y.resize(rows, samples.front().y.size());
    for (Eigen::Index i = 0; i < rows; ++i) {
        m.X.row(i) = samples[i].x.transpose();
        m.U.row(i) = samples[i].u.transpose();
        m.Y.row(i) = samples[i].y.transpose();
    }
    return m;
}

struct LossEval {
    double loss = 0.0;
    Vector d_theta;
    Matrix dA, dB, dC;
};

// Batched loss and, optionally, gradients. Samples are matrix rows.
LossEval eval_problem1(const MlpFeatureMap& fm, const Matrix& A,
                       const Matrix& B, const Matrix& C, const Matrix& X,
                       const Matrix& U, const Matrix& Y, double lambda1,
                       double lambda2, bool want_gradients) {
    const Matrix Zx = fm.evaluate_batch(X);
    const Matrix Zy = fm.evaluate_batch(Y);
    const Matrix Pz = Zx * A.transpose() + U * B.transpose();
    const Matrix Rz = Pz - Zy;
    const Matrix Rx = Pz * C.transpose() - Y;

    LossEval out;
    out.loss = lambda1 * Rz.squaredNorm() + lambda2 * Rx.squaredNorm();
    if (!want_gradients) return out;

    const Matrix G = 2.0 * lambda1 * Rz + 2.0 * lambda2 * Rx * C;
    out.dA = G.transpose() * Zx;
    out.dB = G.transpose() * U;
    out.dC = 2.0 * lambda2 * Rx.transpose() * Pz;
    out.d_theta = Vector::Zero(fm.parameter_count());
    fm.backward_batch(X, G * A, out.d_theta);
    fm.backward_batch(Y, -2.0 * lambda1 * Rz, out.d_theta);
    return out;
}

// Flat parameter vector [theta_g; vec(A); vec(B); vec(C)?], row-major blocks.
struct ParamPacker {
    int n_theta, nz, p, n;
    bool with_C;

    Eigen::Index size() const {
        return n_theta + nz * nz + nz * p + (with_C ? n * nz : 0);
    }

    void pack(const Vector& theta, const Matrix& A, const Matrix& B,
              const Matrix& C, Vector& flat) const {
        flat.resize(size());
        Eigen::Index pos = 0;
        flat.head(n_theta) = theta;
        pos += n_theta;
        for (Eigen::Index r = 0; r < A.rows(); ++r)
            for (Eigen::Index c = 0; c < A.cols(); ++c) flat[pos++] = A(r, c);
        for (Eigen::Index r = 0; r < B.rows(); ++r)
            for (Eigen::Index c = 0; c < B.cols(); ++c) flat[pos++] = B(r, c);
        if (with_C) {
            for (Eigen::Index r = 0; r < C.rows(); ++r)
                for (Eigen::Index c = 0; c < C.cols(); ++c) flat[pos++] = C(r, c);
        }
    }

    void unpack(const Vector& flat, Vector& theta, Matrix& A, Matrix& B,
                Matrix& C) const {
        Eigen::Index pos = 0;
        theta = flat.head(n_theta);
        pos += n_theta;
        for (Eigen::Index r = 0; r < A.rows(); ++r)
            for (Eigen::Index c = 0; c < A.cols(); ++c) A(r, c) = flat[pos++];
        for (Eigen::Index r = 0; r < B.rows(); ++r)
            for (Eigen::Index c = 0; c < B.cols(); ++c) B(r, c) = flat[pos++];
        if (with_C) {
            for (Eigen::Index r = 0; r < C.rows(); ++r)
                for (Eigen::Index c = 0; c < C.cols(); ++c) C(r, c) = flat[pos++];
        }
    }
};

}  // namespace

double problem1_loss(const MlpFeatureMap& fm, const Matrix& A, const Matrix& B,
                     const Matrix& C, const std::vector<Sample>& batch,
                     double lambda1, double lambda2) {
    if (batch.empty()) {
        throw ConfigError("problem1_loss: batch must be nonempty");
    }
    const BatchMatrices m = to_matrices(batch);
    return eval_problem1(fm, A, B, C, m.X, m.U, m.Y, lambda1, lambda2, false)
        .loss;
}

Problem1Gradients loss_gradients(const MlpFeatureMap& fm, const Matrix& A,
                                 const Matrix& B, const Matrix& C,
                                 const std::vector<Sample>& batch,
                                 double lambda1, double lambda2) {
    if (batch.empty()) {
        throw ConfigError("loss_gradients: batch must be nonempty");
    }
    const BatchMatrices m = to_matrices(batch);
    LossEval eval =
        eval_problem1(fm, A, B, C, m.X, m.U, m.Y, lambda1, lambda2, true);
    return {std::move(eval.d_theta), std::move(eval.dA), std::move(eval.dB),
            std::move(eval.dC)};
}

TrainResult train_base_model(const Dataset& dataset,
                             const std::vector<std::string>& partitions,
                             const FeatureSpec& features,
                             const TrainConfig& config) {
    const auto t_start = std::chrono::steady_clock::now();
    if (config.lambda1 < 0 || config.lambda2 < 0 ||
        (config.lambda1 == 0 && config.lambda2 == 0)) {
        throw ConfigError("train: lambda1, lambda2 must be >= 0 and not both 0");
    }
    if (config.lr <= 0) throw ConfigError("train.lr must be > 0");
    if (config.val_fraction <= 0 || config.val_fraction >= 1) {
        throw ConfigError("train.val_fraction must lie in (0, 1)");
    }

    // Collect the partition's trajectories in dataset order; the validation
    // split is the trailing block so it is stable across runs.
    std::vector<const TrajectoryRecord*> records;
    for (const auto& rec : dataset.trajectories) {
        for (const auto& label : partitions) {
            if (rec.partition == label) records.push_back(&rec);
        }
    }
    if (records.size() < 2) {
        throw ConfigError("train: need at least 2 trajectories to split off validation");
    }
    std::size_t n_val = static_cast<std::size_t>(
        std::llround(config.val_fraction * static_cast<double>(records.size())));
    n_val = std::max<std::size_t>(1, std::min(n_val, records.size() - 1));

    auto collect = [](const std::vector<const TrajectoryRecord*>& recs,
                      std::size_t begin, std::size_t end) {
        std::vector<Sample> out;
        for (std::size_t i = begin; i < end; ++i) {
            const auto& t = recs[i]->traj;
            for (std::size_t k = 0; k < t.inputs.size(); ++k) {
                out.push_back({t.states[k], t.inputs[k], t.states[k + 1]});
            }
        }
        return out;
    };
    const std::vector<Sample> train_samples =
        collect(records, 0, records.size() - n_val);
    const std::vector<Sample> val_samples =
        collect(records, records.size() - n_val, records.size());
    if (train_samples.empty() || val_samples.empty()) {
        throw ConfigError("train: empty train or validation split");
    }

    const int n = dataset.system.n;
    MlpFeatureMap fm = init_features(n, features.n_extra, features.hidden,
                                     features.activation, config.seed);
    const int nz = fm.lift_dim();
    const int p = dataset.system.p;

    // Warm-start A, B by EDMD on the fresh features.
    DynamicsFit warm = fit_dynamics(fm, train_samples);
    Matrix A = warm.A;
    Matrix B = warm.B;
    Matrix C = identity_decoder(n, nz);
    if (!config.fix_decoder) {
        C = fit_decoder(fm, train_samples).C;
    }

    const BatchMatrices train_m = to_matrices(train_samples);
    const BatchMatrices val_m = to_matrices(val_samples);
    const double n_train = static_cast<double>(train_samples.size());
    const double n_val_samples = static_cast<double>(val_samples.size());

    ParamPacker packer{fm.parameter_count(), nz, p, n, !config.fix_decoder};
    Vector flat;
    packer.pack(fm.params(), A, B, C, flat);

    // Adam state.
    Vector m1 = Vector::Zero(flat.size());
    Vector m2 = Vector::Zero(flat.size());
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long long step = 0;

    Rng shuffle_rng(splitmix64(config.seed ^ 0x51e55ULL));
    std::vector<Eigen::Index> order(train_samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = static_cast<Eigen::Index>(i);
    }

    TrainReport report;
    double best_val = std::numeric_limits<double>::infinity();
    Vector best_flat = flat;

    const Eigen::Index batch_size =
        std::max<Eigen::Index>(1, config.batch_size);
    Matrix Xb, Ub, Yb;
    Vector theta = fm.params();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle(order, shuffle_rng);
        double epoch_loss = 0.0;
        for (Eigen::Index start = 0;
             start < static_cast<Eigen::Index>(order.size());
             start += batch_size) {
            const Eigen::Index count = std::min(
                batch_size, static_cast<Eigen::Index>(order.size()) - start);
            Xb.resize(count, train_m.X.cols());
            Ub.resize(count, train_m.U.cols());
            Yb.resize(count, train_m.Y.cols());
            for (Eigen::Index i = 0; i < count; ++i) {
                const Eigen::Index j = order[start + i];
                Xb.row(i) = train_m.X.row(j);
                Ub.row(i) = train_m.U.row(j);
                Yb.row(i) = train_m.Y.row(j);
            }
            LossEval eval = eval_problem1(fm, A, B, C, Xb, Ub, Yb,
                                          config.lambda1, config.lambda2, true);
            if (!std::isfinite(eval.loss)) {
                std::ostringstream msg;
                msg << "train: loss diverged at epoch " << epoch;
                throw NumericError(msg.str());
            }
            epoch_loss += eval.loss;

            Vector grad;
            packer.pack(eval.d_theta, eval.dA, eval.dB, eval.dC, grad);
            ++step;
            if (config.optimizer == OptimizerKind::adam) {
                m1 = beta1 * m1 + (1.0 - beta1) * grad;
                m2 = beta2 * m2 +
                     (1.0 - beta2) * grad.cwiseProduct(grad);
                const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
                const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
                flat -= config.lr *
                        (m1 / bc1).cwiseQuotient(
                            ((m2 / bc2).cwiseSqrt().array() + eps).matrix());
            } else {
                flat -= config.lr * grad;
            }
            packer.unpack(flat, theta, A, B, C);
            fm.set_params(theta);
        }

        const double val_loss =
            eval_problem1(fm, A, B, C, val_m.X, val_m.U, val_m.Y,
                          config.lambda1, config.lambda2, false)
                .loss / n_val_samples;
        if (!std::isfinite(val_loss)) {
            std::ostringstream msg;
            msg << "train: validation loss diverged at epoch " << epoch;
            throw NumericError(msg.str());
        }
        report.train_loss.push_back(epoch_loss / n_train);
        report.val_loss.push_back(val_loss);
        if (val_loss < best_val) {
            best_val = val_loss;
            best_flat = flat;
            report.best_epoch = epoch;
        }
    }

    packer.unpack(best_flat, theta, A, B, C);
    fm.set_params(theta);
    report.final_val_loss = best_val;
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();

    TrainResult result;
    result.model.A = A;
    result.model.B = B;
    result.model.C = C;
    std::vector<Sample> all_partition_samples;
    for (const auto* rec : records) {
        const auto& t = rec->traj;
        for (std::size_t k = 0; k < t.inputs.size(); ++k) {
            all_partition_samples.push_back(
                {t.states[k], t.inputs[k], t.states[k + 1]});
        }
    }
    result.model.noise = fit_noise(result.model, fm, all_partition_samples);
    result.fm = std::move(fm);
    result.report = std::move(report);
    return result;
}

}  // namespace kma
