#ifndef KMA_TRAINING_HPP
#define KMA_TRAINING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "kma/dynamics.hpp"
#include "kma/edmd.hpp"
#include "kma/features.hpp"

namespace kma {

enum class OptimizerKind { adam, sgd };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct FeatureSpec {
    int n_extra = 1;
    std::vector<int> hidden = {10};
    Activation activation = Activation::tanh;
};

struct TrainConfig {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double lr = 1e-3;
    int epochs = 2000;
    int batch_size = 256;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::uint64_t seed = 0;
    double val_fraction = 0.1;
    bool fix_decoder = true;  // hold C = [I 0]; the lambda2 term stays active
};

struct TrainReport {
    std::vector<double> train_loss;  // per-sample mean, one entry per epoch
    std::vector<double> val_loss;    // per-sample mean on the validation split
    double final_val_loss = 0.0;     // best validation loss seen
    int best_epoch = -1;
    double wall_time_seconds = 0.0;  // informational only, never persisted
};

// Joint loss of the feature/dynamics fit, summed over the batch:
//   sum_i  lambda1 ||A g(x_i) + B u_i - g(y_i)||^2
//        + lambda2 ||C (A g(x_i) + B u_i) - y_i||^2
double problem1_loss(const MlpFeatureMap& fm, const Matrix& A, const Matrix& B,
                     const Matrix& C, const std::vector<Sample>& batch,
                     double lambda1, double lambda2);

struct Problem1Gradients {
    Vector d_theta;
    Matrix dA;
    Matrix dB;
    Matrix dC;
};

// Exact reverse-mode gradients of problem1_loss. Both g(x_i) and g(y_i)
// contribute to d_theta.
Problem1Gradients loss_gradients(const MlpFeatureMap& fm, const Matrix& A,
                                 const Matrix& B, const Matrix& C,
                                 const std::vector<Sample>& batch,
                                 double lambda1, double lambda2);

struct TrainResult {
    MlpFeatureMap fm;
    LinearEmbeddingModel model;
    TrainReport report;
};

// Minibatch optimization of Problem 1 on the given partitions. The
// validation split is the last ceil(val_fraction * n) trajectories of the
// partition (seed-stable, not random); the returned parameters are the ones
// achieving the best validation loss. A and B are warm-started by EDMD on
// the freshly initialized features. Deterministic for a fixed config.
TrainResult train_base_model(const Dataset& dataset,
                             const std::vector<std::string>& partitions,
                             const FeatureSpec& features,
                             const TrainConfig& config);

}  // namespace kma

#endif
