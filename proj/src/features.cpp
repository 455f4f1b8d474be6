#include "kma/features.hpp"

#include <cmath>

#include "kma/errors.hpp"
#include "kma/rng.hpp"

namespace kma {

Matrix StateLift::evaluate_batch(const Matrix& X) const {
    Matrix Z(X.rows(), lift_dim());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Z.row(i) = evaluate(X.row(i).transpose()).transpose();
    }
    return Z;
}

std::string to_string(Activation a) {
    return a == Activation::tanh ? "tanh" : "relu";
}

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    throw ConfigError("features.activation: unknown activation '" + s + "'");
}

namespace {

inline Matrix apply_activation(const Matrix& S, Activation a) {
    if (a == Activation::tanh) return S.array().tanh();
    return S.array().max(0.0);
}

// Derivative given pre-activation S and activated output H.
inline Matrix activation_grad(const Matrix& S, const Matrix& H, Activation a) {
    if (a == Activation::tanh) return 1.0 - H.array().square();
    return (S.array() > 0.0).cast<double>();
}

}  // namespace

MlpFeatureMap::MlpFeatureMap(int n, int n_extra, Activation activation,
                             std::vector<Layer> layers)
    : n_(n), n_extra_(n_extra), activation_(activation),
      layers_(std::move(layers)) {
    if (n_extra_ > 0) {
        if (layers_.empty()) {
            throw ConfigError("MlpFeatureMap: layers required when n_extra > 0");
        }
        if (layers_.front().W.cols() != n_) {
            throw ConfigError("MlpFeatureMap: first layer input dim mismatch");
        }
        if (layers_.back().W.rows() != n_extra_) {
            throw ConfigError("MlpFeatureMap: last layer output dim mismatch");
        }
    }
}

Vector MlpFeatureMap::evaluate(const Vector& x) const {
    Vector z(lift_dim());
    z.head(n_) = x;
    if (n_extra_ == 0) return z;
    Vector h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Vector s = layers_[l].W * h + layers_[l].b;
        if (l + 1 < layers_.size()) {
            h = activation_ == Activation::tanh
                    ? Vector(s.array().tanh())
                    : Vector(s.array().max(0.0));
        } else {
            h = s;  // linear output layer
        }
    }
    z.tail(n_extra_) = h;
    return z;
}

Matrix MlpFeatureMap::evaluate_batch(const Matrix& X) const {
    Matrix Z(X.rows(), lift_dim());
    Z.leftCols(n_) = X;
    if (n_extra_ == 0) return Z;
    Matrix H = X;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Matrix S = (H * layers_[l].W.transpose()).rowwise() +
                   layers_[l].b.transpose();
        H = (l + 1 < layers_.size()) ? apply_activation(S, activation_) : S;
    }
    Z.rightCols(n_extra_) = H;
    return Z;
}

int MlpFeatureMap::parameter_count() const {
    int count = 0;
    for (const auto& layer : layers_) {
        count += static_cast<int>(layer.W.size() + layer.b.size());
    }
    return count;
}

Vector MlpFeatureMap::params() const {
    Vector theta(parameter_count());
    Eigen::Index pos = 0;
    for (const auto& layer : layers_) {
        for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
                theta[pos++] = layer.W(r, c);
            }
        }
        theta.segment(pos, layer.b.size()) = layer.b;
        pos += layer.b.size();
    }
    return theta;
}

void MlpFeatureMap::set_params(const Vector& theta) {
    if (theta.size() != parameter_count()) {
        throw ConfigError("MlpFeatureMap::set_params: parameter size mismatch");
    }
    Eigen::Index pos = 0;
    for (auto& layer : layers_) {
        for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
                layer.W(r, c) = theta[pos++];
            }
        }
        layer.b = theta.segment(pos, layer.b.size());
        pos += layer.b.size();
    }
}

GradientBundle MlpFeatureMap::backward(const Vector& x, const Vector& upstream,
                                       bool want_input_gradient) const {
    if (upstream.size() != lift_dim()) {
        throw ConfigError("feature_backward: upstream length must equal the lift dim");
    }
    GradientBundle out;
    out.d_theta = Vector::Zero(parameter_count());
    Matrix X = x.transpose();
    Matrix U = upstream.transpose();
    backward_batch(X, U, out.d_theta);
    if (want_input_gradient) {
        // d<u, g(x)>/dx = u_prefix + J_mlp(x)^T u_mlp; recover the MLP part
        // by backpropagating through the cached layer stack.
        Vector d_input = upstream.head(n_);
        if (n_extra_ > 0) {
            std::vector<Matrix> pre, post;
            Matrix H = X;
            post.push_back(H);
            for (std::size_t l = 0; l < layers_.size(); ++l) {
                Matrix S = (H * layers_[l].W.transpose()).rowwise() +
                           layers_[l].b.transpose();
                pre.push_back(S);
                H = (l + 1 < layers_.size()) ? apply_activation(S, activation_)
                                             : S;
                post.push_back(H);
            }
            Matrix delta = upstream.tail(n_extra_).transpose();
            for (std::size_t l = layers_.size(); l-- > 0;) {
                Matrix back = delta * layers_[l].W;
                if (l > 0) {
                    back = back.cwiseProduct(
                        activation_grad(pre[l - 1], post[l], activation_));
                }
                delta = back;
            }
            d_input += delta.row(0).transpose();
        }
        out.d_input = d_input;
    }
    return out;
}

void MlpFeatureMap::backward_batch(const Matrix& X, const Matrix& Upstream,
                                   Vector& d_theta) const {
    if (d_theta.size() != parameter_count()) {
        d_theta = Vector::Zero(parameter_count());
    }
    if (n_extra_ == 0) return;

    const std::size_t L = layers_.size();
    std::vector<Matrix> pre(L);       // pre-activations per layer
    std::vector<Matrix> post(L + 1);  // post[0] = X
    post[0] = X;
    for (std::size_t l = 0; l < L; ++l) {
        pre[l] = (post[l] * layers_[l].W.transpose()).rowwise() +
                 layers_[l].b.transpose();
        post[l + 1] = (l + 1 < L) ? apply_activation(pre[l], activation_)
                                  : pre[l];
    }

    // Offsets of each layer's W block in the flat vector.
    std::vector<Eigen::Index> offsets(L);
    Eigen::Index pos = 0;
    for (std::size_t l = 0; l < L; ++l) {
        offsets[l] = pos;
        pos += layers_[l].W.size() + layers_[l].b.size();
    }

    Matrix delta = Upstream.rightCols(n_extra_);
    for (std::size_t l = L; l-- > 0;) {
        const Matrix dW = delta.transpose() * post[l];
        const Vector db = delta.colwise().sum().transpose();
        Eigen::Index o = offsets[l];
        for (Eigen::Index r = 0; r < dW.rows(); ++r) {
            for (Eigen::Index c = 0; c < dW.cols(); ++c) {
                d_theta[o++] += dW(r, c);
            }
        }
        d_theta.segment(o, db.size()) += db;
        if (l > 0) {
            delta = (delta * layers_[l].W).cwiseProduct(
                activation_grad(pre[l - 1], post[l], activation_));
        }
    }
}

MlpFeatureMap init_features(int n, int n_extra,
                            const std::vector<int>& hidden_sizes,
                            Activation activation, std::uint64_t seed) {
    if (n_extra > 0 && hidden_sizes.empty()) {
        throw ConfigError("init_features: hidden_sizes must be nonempty");
    }
    std::vector<MlpFeatureMap::Layer> layers;
    if (n_extra > 0) {
        std::vector<int> dims;
        dims.push_back(n);
        dims.insert(dims.end(), hidden_sizes.begin(), hidden_sizes.end());
        dims.push_back(n_extra);
        Rng rng(splitmix64(seed));
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            const int fan_in = dims[l];
            const int fan_out = dims[l + 1];
            const double s = std::sqrt(6.0 / (fan_in + fan_out));
            MlpFeatureMap::Layer layer;
            layer.W.resize(fan_out, fan_in);
            for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
                for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
                    layer.W(r, c) = rng.uniform(-s, s);
                }
            }
            layer.b = Vector::Zero(fan_out);
            layers.push_back(std::move(layer));
        }
    }
    return MlpFeatureMap(n, n_extra, activation, std::move(layers));
}

}  // namespace kma
