#ifndef KMA_EDMD_HPP
#define KMA_EDMD_HPP

#include <Eigen/Dense>
#include <vector>

#include "kma/dynamics.hpp"
#include "kma/features.hpp"

namespace kma {

// Diagonal Gaussian noise attached to a fitted model. Entries are variances,
// clamped from below so log-densities stay finite on noise-free data.
struct GaussianNoiseModel {
    Vector sigma_x;  // state residual variances, length n
    Vector sigma_z;  // lifted residual variances, length N_x
};

inline constexpr double kVarianceFloor = 1e-12;

// z+ = A z + B u, x_pred = C z+.
struct LinearEmbeddingModel {
    Matrix A;  // N_x x N_x
    Matrix B;  // N_x x p
    Matrix C;  // n x N_x
    GaussianNoiseModel noise;
};

// Analytic decoder [I_n 0] available when the lift has an identity prefix.
Matrix identity_decoder(int n, int lift_dim);

struct LeastSquaresResult {
    Matrix W;
    int rank = 0;
    bool rank_deficient = false;
};

// Minimizes ||Y - Phi W||_F^2 + ridge ||W||_F^2 by SVD. Singular values
// below rcond * sigma_max are truncated, which makes the ridge-free solution
// the minimum-norm one on rank-deficient problems.
LeastSquaresResult least_squares(const Matrix& Phi, const Matrix& Y,
                                 double ridge = 0.0, double rcond = 1e-10);

struct DynamicsFit {
    Matrix A;
    Matrix B;
    bool rank_deficient = false;
};

// EDMD regression of [g(x); u] -> g(y) over the given samples.
DynamicsFit fit_dynamics(const StateLift& lift, const std::vector<Sample>& data,
                         double ridge = 0.0);

struct DecoderFit {
    Matrix C;
    bool rank_deficient = false;
};

// Least-squares decoder g(x) -> x.
DecoderFit fit_decoder(const StateLift& lift, const std::vector<Sample>& data,
                       double ridge = 0.0);

// Diagonal MLE of the state residuals y - C(A g(x) + B u) and the lifted
// residuals g(y) - (A g(x) + B u), clamped at kVarianceFloor.
GaussianNoiseModel fit_noise(const LinearEmbeddingModel& model,
                             const StateLift& lift,
                             const std::vector<Sample>& data);

// All monomials in x of total degree 1..max_degree plus the constant 1.
// Ordering convention: the state itself first (degree-1 terms), then the
// constant, then each higher degree in graded-lexicographic order. The
// identity prefix keeps C = [I 0] exactly representable.
Vector monomial_features(const Vector& x, int max_degree);
int monomial_dim(int n, int max_degree);

class MonomialFeatureMap final : public StateLift {
public:
    MonomialFeatureMap(int n, int max_degree)
        : n_(n), max_degree_(max_degree), dim_(monomial_dim(n, max_degree)) {}

    int state_dim() const override { return n_; }
    int lift_dim() const override { return dim_; }
    int max_degree() const { return max_degree_; }
    Vector evaluate(const Vector& x) const override {
        return monomial_features(x, max_degree_);
    }

private:
    int n_;
    int max_degree_;
    int dim_;
};

}  // namespace kma

#endif
