#include "kma/edmd.hpp"

#include <Eigen/SVD>

#include "kma/errors.hpp"

namespace kma {

Matrix identity_decoder(int n, int lift_dim) {
    Matrix C = Matrix::Zero(n, lift_dim);
    C.topLeftCorner(n, n).setIdentity();
    return C;
}

LeastSquaresResult least_squares(const Matrix& Phi, const Matrix& Y,
                                 double ridge, double rcond) {
    if (Phi.rows() < 1 || Phi.rows() != Y.rows()) {
        throw ConfigError("least_squares: row counts must match and be >= 1");
    }
    Eigen::BDCSVD<Matrix> svd(Phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv[0] : 0.0;
    const double cutoff = rcond * smax;

    LeastSquaresResult result;
    Vector filter = Vector::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (smax > 0.0 && sv[i] > cutoff) {
            filter[i] = sv[i] / (sv[i] * sv[i] + ridge);
            ++result.rank;
        }
    }
    result.rank_deficient = result.rank < std::min(Phi.rows(), Phi.cols());
    result.W = svd.matrixV() * filter.asDiagonal() *
               (svd.matrixU().transpose() * Y);
    return result;
}

namespace {

// Stacked regressors [g(x_j) u_j] (rows) and lifted targets g(y_j).
void lift_samples(const StateLift& lift, const std::vector<Sample>& data,
                  Matrix& Phi, Matrix& Zy) {
    const int nz = lift.lift_dim();
    const int p = static_cast<int>(data.front().u.size());
    Matrix X(data.size(), lift.state_dim());
    Matrix Y(data.size(), lift.state_dim());
    Matrix U(data.size(), p);
    for (std::size_t j = 0; j < data.size(); ++j) {
        X.row(j) = data[j].x.transpose();
        Y.row(j) = data[j].y.transpose();
        U.row(j) = data[j].u.transpose();
    }
    Phi.resize(data.size(), nz + p);
    Phi.leftCols(nz) = lift.evaluate_batch(X);
    Phi.rightCols(p) = U;
    Zy = lift.evaluate_batch(Y);
}

}  // namespace

DynamicsFit fit_dynamics(const StateLift& lift, const std::vector<Sample>& data,
                         double ridge) {
    if (data.empty()) {
        throw ConfigError("fit_dynamics: sample set must be nonempty");
    }
    Matrix Phi, Zy;
    lift_samples(lift, data, Phi, Zy);
    const int nz = lift.lift_dim();
    const int p = static_cast<int>(data.front().u.size());
    LeastSquaresResult ls = least_squares(Phi, Zy, ridge);
    DynamicsFit fit;
    fit.A = ls.W.topRows(nz).transpose();
    fit.B = ls.W.bottomRows(p).transpose();
    fit.rank_deficient = ls.rank_deficient;
    return fit;
}

DecoderFit fit_decoder(const StateLift& lift, const std::vector<Sample>& data,
                       double ridge) {
    if (data.empty()) {
        throw ConfigError("fit_decoder: sample set must be nonempty");
    }
    Matrix X(data.size(), lift.state_dim());
    for (std::size_t j = 0; j < data.size(); ++j) {
        X.row(j) = data[j].x.transpose();
    }
    const Matrix Zx = lift.evaluate_batch(X);
    LeastSquaresResult ls = least_squares(Zx, X, ridge);
    DecoderFit fit;
    fit.C = ls.W.transpose();
    fit.rank_deficient = ls.rank_deficient;
    return fit;
}

GaussianNoiseModel fit_noise(const LinearEmbeddingModel& model,
                             const StateLift& lift,
                             const std::vector<Sample>& data) {
    if (data.size() < 2) {
        throw ConfigError("fit_noise: need at least 2 samples");
    }
    const int n = lift.state_dim();
    const int nz = lift.lift_dim();
    Vector sx = Vector::Zero(n);
    Vector sz = Vector::Zero(nz);
    for (const auto& s : data) {
        const Vector zx = lift.evaluate(s.x);
        const Vector zy = lift.evaluate(s.y);
        const Vector pred_z = model.A * zx + model.B * s.u;
        const Vector rx = s.y - model.C * pred_z;
        const Vector rz = zy - pred_z;
        sx += rx.cwiseProduct(rx);
        sz += rz.cwiseProduct(rz);
    }
    GaussianNoiseModel noise;
    noise.sigma_x = (sx / static_cast<double>(data.size()))
                        .cwiseMax(kVarianceFloor);
    noise.sigma_z = (sz / static_cast<double>(data.size()))
                        .cwiseMax(kVarianceFloor);
    return noise;
}

int monomial_dim(int n, int max_degree) {
    // n degree-1 terms + constant + higher degrees counted recursively.
    int dim = n + 1;
    for (int d = 2; d <= max_degree; ++d) {
        // C(n+d-1, d) exponent vectors of total degree d.
        long long count = 1;
        for (int i = 1; i <= d; ++i) {
            count = count * (n + i - 1) / i;
        }
        dim += static_cast<int>(count);
    }
    return dim;
}

namespace {

void emit_monomials(const Vector& x, int degree, int var, double prefix,
                    std::vector<double>& out) {
    if (var == static_cast<int>(x.size()) - 1) {
        double term = prefix;
        for (int e = 0; e < degree; ++e) term *= x[var];
        out.push_back(term);
        return;
    }
    // Graded-lex within a degree: highest power of the earliest variable first.
    for (int e = degree; e >= 0; --e) {
        double term = prefix;
        for (int k = 0; k < e; ++k) term *= x[var];
        emit_monomials(x, degree - e, var + 1, term, out);
    }
}

}  // namespace

Vector monomial_features(const Vector& x, int max_degree) {
    if (max_degree < 1) {
        throw ConfigError("monomial_features: max_degree must be >= 1");
    }
    std::vector<double> out;
    out.reserve(monomial_dim(static_cast<int>(x.size()), max_degree));
    for (Eigen::Index i = 0; i < x.size(); ++i) out.push_back(x[i]);
    out.push_back(1.0);
    for (int d = 2; d <= max_degree; ++d) {
        emit_monomials(x, d, 0, 1.0, out);
    }
    return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

}  // namespace kma
