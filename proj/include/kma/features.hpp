#ifndef KMA_FEATURES_HPP
#define KMA_FEATURES_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "kma/dynamics.hpp"

namespace kma {

// A state lift z = g(x). Implementations: MlpFeatureMap (learned),
// MonomialFeatureMap (EDMD baseline dictionary), IdentityFeatureMap.
class StateLift {
public:
    virtual ~StateLift() = default;
    virtual int state_dim() const = 0;
    virtual int lift_dim() const = 0;
    virtual Vector evaluate(const Vector& x) const = 0;

    // Rows are samples; default loops over evaluate().
    virtual Matrix evaluate_batch(const Matrix& X) const;
};

enum class Activation { tanh, relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct GradientBundle {
    Vector d_theta;
    std::optional<Vector> d_input;
};

// The lift used by the learned models: an MLP whose output is appended to
// the state itself, z = [x; mlp(x)]. The identity prefix is structural, so
// the decoder C = [I 0] recovers x exactly without any learned parameters.
//
// Parameter layout (params()/set_params()): layer by layer, weight matrix in
// row-major order followed by the bias vector. Serialized models follow the
// same layout.
class MlpFeatureMap final : public StateLift {
public:
    struct Layer {
        Matrix W;
        Vector b;
    };

    MlpFeatureMap() = default;
    MlpFeatureMap(int n, int n_extra, Activation activation,
                  std::vector<Layer> layers);

    int state_dim() const override { return n_; }
    int lift_dim() const override { return n_ + n_extra_; }
    int n_extra() const { return n_extra_; }
    Activation activation() const { return activation_; }
    const std::vector<Layer>& layers() const { return layers_; }

    Vector evaluate(const Vector& x) const override;
    Matrix evaluate_batch(const Matrix& X) const override;

    // Reverse-mode gradient of <upstream, g(x)> with respect to the flat
    // parameter vector. The identity prefix carries no parameters, so only
    // upstream[n..N_x) reaches the MLP.
    GradientBundle backward(const Vector& x, const Vector& upstream,
                            bool want_input_gradient = false) const;

    // Batched form used by the trainer: accumulates the parameter gradient
    // of sum_i <Upstream.row(i), g(X.row(i))> into d_theta.
    void backward_batch(const Matrix& X, const Matrix& Upstream,
                        Vector& d_theta) const;

    int parameter_count() const;
    Vector params() const;
    void set_params(const Vector& theta);

private:
    int n_ = 0;
    int n_extra_ = 0;
    Activation activation_ = Activation::tanh;
    std::vector<Layer> layers_;
};

// Glorot-uniform weights (Uniform[-s, s], s = sqrt(6/(fan_in+fan_out))),
// zero biases, deterministic in the seed.
MlpFeatureMap init_features(int n, int n_extra,
                            const std::vector<int>& hidden_sizes,
                            Activation activation, std::uint64_t seed);

// z = x. Used for exact-recovery checks and linear sanity models.
class IdentityFeatureMap final : public StateLift {
public:
    explicit IdentityFeatureMap(int n) : n_(n) {}
    int state_dim() const override { return n_; }
    int lift_dim() const override { return n_; }
    Vector evaluate(const Vector& x) const override { return x; }
    Matrix evaluate_batch(const Matrix& X) const override { return X; }

private:
    int n_;
};

}  // namespace kma

#endif
