#ifndef KMA_AVERAGING_HPP
#define KMA_AVERAGING_HPP

#include <memory>
#include <string>
#include <vector>

#include "kma/dynamics.hpp"
#include "kma/edmd.hpp"
#include "kma/features.hpp"
#include "kma/training.hpp"

namespace kma {

// Ensemble of linear embedding models sharing one feature map. Member 0 is
// the base model from Problem 1; the rest are EDMD refits on their own data
// partitions.
struct ModelEnsemble {
    std::shared_ptr<const StateLift> lift;
    std::vector<LinearEmbeddingModel> members;
    std::vector<std::string> partitions;  // training partition per member
};

// The averaged model. CA and CB are weighted sums of the PRODUCTS C_i A_i
// and C_i B_i; they are not products of the averaged factors, and state
// predictions must go through them.
struct WeightedModel {
    Matrix A;   // sum_i w_i A_i
    Matrix B;   // sum_i w_i B_i
    Matrix CA;  // sum_i w_i C_i A_i
    Matrix CB;  // sum_i w_i C_i B_i
    Vector w;
};

// log N(y; C_i(A_i g(x) + B_i u), diag(sigma_x)), evaluated in log space.
double log_predictive_density(const LinearEmbeddingModel& member,
                              const StateLift& lift, const Sample& sample);

// Same likelihood on the lifted state: log N(g(y); A_i g(x) + B_i u,
// diag(sigma_z)). Kept for ablation; weights default to the state density.
double log_predictive_density_latent(const LinearEmbeddingModel& member,
                                     const StateLift& lift,
                                     const Sample& sample);

// Held-out estimate of the expected log pointwise predictive density: the
// sum of log_predictive_density over the unseen partition Da.
double elpd(const LinearEmbeddingModel& member, const StateLift& lift,
            const std::vector<Sample>& held_out);

double elpd_latent(const LinearEmbeddingModel& member, const StateLift& lift,
                   const std::vector<Sample>& held_out);

// Pseudo-BMA weights w_i = exp(elpd_i) / sum_k exp(elpd_k), computed with
// max subtraction so arbitrarily large elpds stay finite.
Vector pseudo_bma_weights(const Vector& elpds);

// Assembles the four averaged matrices for the given weight vector.
WeightedModel build_weighted_model(const ModelEnsemble& ensemble,
                                   const Vector& w);

// Degenerate single-model ensemble with w = [1]. All single-model rollouts
// go through this wrapper so they share the weighted code path bit for bit.
WeightedModel weighted_from_single(const LinearEmbeddingModel& model);

// z_next = A_bar z + B_bar u.
Vector advance_latent(const WeightedModel& wm, const Vector& z, const Vector& u);

// x_pred = CA_bar z + CB_bar u.
Vector predict_state(const WeightedModel& wm, const Vector& z, const Vector& u);

// Multi-step prediction: encode x0 once, advance the latent state with
// Eq.-style autonomous dynamics, decode each step. Predicted states are
// never re-encoded unless `reencode` is set (ablation only).
std::vector<Vector> rollout(const WeightedModel& wm, const StateLift& lift,
                            const Vector& x0, const std::vector<Vector>& inputs,
                            bool reencode = false);

enum class WeightDensity { state, latent };

struct KmaOptions {
    double ridge = 0.0;
    WeightDensity density = WeightDensity::state;
};

struct KmaResult {
    std::shared_ptr<const MlpFeatureMap> fm;
    ModelEnsemble ensemble;
    Vector elpds;
    Vector w;
    WeightedModel weighted;
    TrainReport train_report;
    std::size_t n_heldout = 0;
};

// The full procedure: train the base model on D1, refit (A_i, B_i, C_i) by
// EDMD on each remaining partition D2..DN, fit per-member noise on each
// member's own partition, score every member on the held-out partition Da,
// convert scores to pseudo-BMA weights and build the weighted model.
KmaResult run_kma(const Dataset& dataset, const FeatureSpec& features,
                  const TrainConfig& train_config, const KmaOptions& options = {});

}  // namespace kma

#endif
