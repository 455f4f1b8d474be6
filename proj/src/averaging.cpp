#include "kma/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kma/errors.hpp"

namespace kma {

namespace {

double diag_gaussian_log_density(const Vector& residual, const Vector& variances) {
    constexpr double log_two_pi = 1.8378770664093454836;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < residual.size(); ++i) {
        acc += log_two_pi + std::log(variances[i]) +
               residual[i] * residual[i] / variances[i];
    }
    return -0.5 * acc;
}

}  // namespace

double log_predictive_density(const LinearEmbeddingModel& member,
                              const StateLift& lift, const Sample& sample) {
    const Vector pred =
        member.C * (member.A * lift.evaluate(sample.x) + member.B * sample.u);
    return diag_gaussian_log_density(sample.y - pred, member.noise.sigma_x);
}

double log_predictive_density_latent(const LinearEmbeddingModel& member,
                                     const StateLift& lift,
                                     const Sample& sample) {
    const Vector pred = member.A * lift.evaluate(sample.x) + member.B * sample.u;
    return diag_gaussian_log_density(lift.evaluate(sample.y) - pred,
                                     member.noise.sigma_z);
}

double elpd(const LinearEmbeddingModel& member, const StateLift& lift,
            const std::vector<Sample>& held_out) {
    if (held_out.empty()) {
        throw ConfigError("elpd: held-out partition must be nonempty");
    }
    double acc = 0.0;
    for (const auto& s : held_out) {
        acc += log_predictive_density(member, lift, s);
    }
    return acc;
}

double elpd_latent(const LinearEmbeddingModel& member, const StateLift& lift,
                   const std::vector<Sample>& held_out) {
    if (held_out.empty()) {
        throw ConfigError("elpd: held-out partition must be nonempty");
    }
    double acc = 0.0;
    for (const auto& s : held_out) {
        acc += log_predictive_density_latent(member, lift, s);
    }
    return acc;
}

Vector pseudo_bma_weights(const Vector& elpds) {
    if (elpds.size() < 1) {
        throw ConfigError("pseudo_bma_weights: need at least one elpd");
    }
    if (!elpds.allFinite()) {
        throw ConfigError("pseudo_bma_weights: elpds must be finite");
    }
    const double shift = elpds.maxCoeff();
    Vector w = (elpds.array() - shift).exp();
    return w / w.sum();
}

WeightedModel build_weighted_model(const ModelEnsemble& ensemble,
                                   const Vector& w) {
    const std::size_t N = ensemble.members.size();
    if (static_cast<std::size_t>(w.size()) != N || N == 0) {
        throw ConfigError("build_weighted_model: weight count must match ensemble size");
    }
    const auto& first = ensemble.members.front();
    for (const auto& m : ensemble.members) {
        if (m.A.rows() != first.A.rows() || m.B.cols() != first.B.cols() ||
            m.C.rows() != first.C.rows() || m.C.cols() != first.A.cols()) {
            throw ConfigError("build_weighted_model: inconsistent member dimensions");
        }
    }
    WeightedModel wm;
    wm.w = w;
    wm.A = Matrix::Zero(first.A.rows(), first.A.cols());
    wm.B = Matrix::Zero(first.B.rows(), first.B.cols());
    wm.CA = Matrix::Zero(first.C.rows(), first.A.cols());
    wm.CB = Matrix::Zero(first.C.rows(), first.B.cols());
    for (std::size_t i = 0; i < N; ++i) {
        const auto& m = ensemble.members[i];
        wm.A += w[i] * m.A;
        wm.B += w[i] * m.B;
        wm.CA += w[i] * (m.C * m.A);
        wm.CB += w[i] * (m.C * m.B);
    }
    return wm;
}

WeightedModel weighted_from_single(const LinearEmbeddingModel& model) {
    ModelEnsemble ensemble;
    ensemble.members.push_back(model);
    Vector w(1);
    w[0] = 1.0;
    return build_weighted_model(ensemble, w);
}

Vector advance_latent(const WeightedModel& wm, const Vector& z, const Vector& u) {
    return wm.A * z + wm.B * u;
}

Vector predict_state(const WeightedModel& wm, const Vector& z, const Vector& u) {
    return wm.CA * z + wm.CB * u;
}

std::vector<Vector> rollout(const WeightedModel& wm, const StateLift& lift,
                            const Vector& x0, const std::vector<Vector>& inputs,
                            bool reencode) {
    if (inputs.empty()) {
        throw ConfigError("rollout: input sequence must be nonempty");
    }
    std::vector<Vector> predictions;
    predictions.reserve(inputs.size());
    Vector z = lift.evaluate(x0);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Vector x_pred = predict_state(wm, z, inputs[k]);
        if (!x_pred.allFinite()) {
            std::ostringstream msg;
            msg << "rollout: prediction diverged at step " << k + 1;
            throw NumericError(msg.str());
        }
        predictions.push_back(x_pred);
        z = reencode ? lift.evaluate(x_pred) : advance_latent(wm, z, inputs[k]);
    }
    return predictions;
}

KmaResult run_kma(const Dataset& dataset, const FeatureSpec& features,
                  const TrainConfig& train_config, const KmaOptions& options) {
    // Partitions D1..DN in dataset order; Da is the held-out score set.
    std::vector<std::string> member_partitions;
    for (const auto& label : dataset.partition_labels()) {
        if (label.size() >= 2 && label[0] == 'D' && label != "Da") {
            member_partitions.push_back(label);
        }
    }
    if (member_partitions.empty() || member_partitions.front() != "D1") {
        throw ConfigError("run_kma: dataset must contain partition D1");
    }
    if (!dataset.has_partition("Da")) {
        throw ConfigError("run_kma: held-out partition required");
    }

    KmaResult result;

    // Step 1: base model by Problem 1 on D1.
    TrainResult base = train_base_model(dataset, {"D1"}, features, train_config);
    auto fm = std::make_shared<MlpFeatureMap>(std::move(base.fm));
    result.fm = fm;
    result.train_report = std::move(base.report);
    result.ensemble.lift = fm;
    result.ensemble.members.push_back(std::move(base.model));
    result.ensemble.partitions.push_back("D1");

    // Step 2: EDMD members on D2..DN with the feature design held fixed.
    for (std::size_t i = 1; i < member_partitions.size(); ++i) {
        const std::string& label = member_partitions[i];
        const auto samples = dataset.samples_for(label);
        if (samples.empty()) {
            throw ConfigError("run_kma: partition " + label + " is empty");
        }
        LinearEmbeddingModel member;
        DynamicsFit dyn = fit_dynamics(*fm, samples, options.ridge);
        member.A = std::move(dyn.A);
        member.B = std::move(dyn.B);
        member.C = fit_decoder(*fm, samples, options.ridge).C;
        member.noise = fit_noise(member, *fm, samples);
        result.ensemble.members.push_back(std::move(member));
        result.ensemble.partitions.push_back(label);
    }

    // Score on unseen data and convert to weights.
    const auto held_out = dataset.samples_for("Da");
    if (held_out.empty()) {
        throw ConfigError("run_kma: held-out partition required");
    }
    result.n_heldout = held_out.size();
    const std::size_t N = result.ensemble.members.size();
    result.elpds.resize(static_cast<Eigen::Index>(N));
    for (std::size_t i = 0; i < N; ++i) {
        const auto& member = result.ensemble.members[i];
        result.elpds[static_cast<Eigen::Index>(i)] =
            options.density == WeightDensity::latent
                ? elpd_latent(member, *fm, held_out)
                : elpd(member, *fm, held_out);
    }
    result.w = pseudo_bma_weights(result.elpds);
    result.weighted = build_weighted_model(result.ensemble, result.w);
    return result;
}

}  // namespace kma
