#include <doctest.h>

#include <cmath>

#include "kma/edmd.hpp"
#include "kma/errors.hpp"
#include "kma/rng.hpp"

using namespace kma;

namespace {

// Random linear system x+ = A x + B u with spectral content scaled inside
// the unit disc, plus noise-free samples from it.
struct LinearSystemData {
    Matrix A;
    Matrix B;
    std::vector<Sample> samples;
};

LinearSystemData random_linear_system(int n, int p, int m, Rng& rng) {
    LinearSystemData data;
    data.A.resize(n, n);
    for (Eigen::Index i = 0; i < data.A.size(); ++i) {
        data.A(i / n, i % n) = rng.uniform(-1, 1);
    }
    data.A *= 0.9 / std::max(1.0, data.A.cwiseAbs().rowwise().sum().maxCoeff());
    data.B.resize(n, p);
    for (Eigen::Index i = 0; i < data.B.size(); ++i) {
        data.B(i / p, i % p) = rng.uniform(-1, 1);
    }
    for (int k = 0; k < m; ++k) {
        Vector x(n), u(p);
        for (int i = 0; i < n; ++i) x[i] = rng.uniform(-2, 2);
        for (int i = 0; i < p; ++i) u[i] = rng.uniform(-2, 2);
        data.samples.push_back({x, u, data.A * x + data.B * u});
    }
    return data;
}

}  // namespace

TEST_CASE("least_squares") {
    SUBCASE("exact scalar fit") {
        Matrix Phi(2, 1), Y(2, 1);
        Phi << 1, 2;
        Y << 2, 4;
        CHECK(least_squares(Phi, Y).W(0, 0) == doctest::Approx(2.0));
    }

    SUBCASE("identity design returns the targets") {
        const Matrix Y = Matrix::Random(4, 3);
        const Matrix W = least_squares(Matrix::Identity(4, 4), Y).W;
        CHECK((W - Y).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("normal-equations hand case") {
        Matrix Phi(2, 1), Y(2, 1);
        Phi << 1, 1;
        Y << 1, 3;
        CHECK(least_squares(Phi, Y).W(0, 0) == doctest::Approx(2.0));
    }

    SUBCASE("all-zero design is flagged and returns the zero solution") {
        const LeastSquaresResult r =
            least_squares(Matrix::Zero(3, 2), Matrix::Ones(3, 1), 0.0);
        CHECK(r.rank_deficient);
        CHECK(r.W.isZero(0));
    }

    SUBCASE("ridge monotonicity") {
        Rng rng(31);
        Matrix Phi(20, 4), Y(20, 2);
        for (Eigen::Index i = 0; i < Phi.size(); ++i) {
            Phi(i / 4, i % 4) = rng.uniform(-1, 1);
        }
        for (Eigen::Index i = 0; i < Y.size(); ++i) {
            Y(i / 2, i % 2) = rng.uniform(-1, 1);
        }
        double prev = least_squares(Phi, Y, 0.0).W.norm();
        for (double ridge : {1e-3, 1e-1, 1.0, 10.0}) {
            const double cur = least_squares(Phi, Y, ridge).W.norm();
            CHECK(cur <= prev + 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("fit_dynamics") {
    SUBCASE("recovers a scalar system exactly") {
        // x+ = 0.5 x + u, identity features.
        Rng rng(7);
        std::vector<Sample> data;
        for (int k = 0; k < 50; ++k) {
            Vector x(1), u(1);
            x << rng.uniform(-2, 2);
            u << rng.uniform(-1, 1);
            data.push_back({x, u, 0.5 * x + u});
        }
        const IdentityFeatureMap lift(1);
        const DynamicsFit fit = fit_dynamics(lift, data);
        CHECK(fit.A(0, 0) == doctest::Approx(0.5).epsilon(1e-10));
        CHECK(fit.B(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK_FALSE(fit.rank_deficient);
    }

    SUBCASE("u == 0 data recovers A with B near zero") {
        Rng rng(13);
        Matrix M(2, 2);
        M << 0.8, 0.1, -0.2, 0.7;
        std::vector<Sample> data;
        for (int k = 0; k < 100; ++k) {
            Vector x(2);
            x << rng.uniform(-2, 2), rng.uniform(-2, 2);
            data.push_back({x, Vector::Zero(1), M * x});
        }
        const IdentityFeatureMap lift(2);
        const DynamicsFit fit = fit_dynamics(lift, data);
        CHECK((fit.A - M).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(fit.B.cwiseAbs().maxCoeff() < 1e-8);
    }

    SUBCASE("single repeated sample is rank deficient") {
        Vector x(2), u(1);
        x << 1, 1;
        u << 0.5;
        std::vector<Sample> data(3, Sample{x, u, x});
        const IdentityFeatureMap lift(2);
        CHECK(fit_dynamics(lift, data).rank_deficient);
    }

    SUBCASE("empty data is rejected") {
        const IdentityFeatureMap lift(2);
        CHECK_THROWS_AS(fit_dynamics(lift, {}), ConfigError);
    }

    SUBCASE("exact recovery on random stable systems (spec invariant)") {
        Rng rng(101);
        for (int trial = 0; trial < 5; ++trial) {
            const int n = 2 + static_cast<int>(rng.index(5));  // N_x <= 6
            const int p = 1 + static_cast<int>(rng.index(2));
            const LinearSystemData sys =
                random_linear_system(n, p, 10 * (n + p), rng);
            const IdentityFeatureMap lift(n);
            const DynamicsFit fit = fit_dynamics(lift, sys.samples);
            CHECK((fit.A - sys.A).cwiseAbs().maxCoeff() < 1e-8);
            CHECK((fit.B - sys.B).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("fit_decoder") {
    Rng rng(19);

    SUBCASE("identity-prefix features give C = [I 0]") {
        std::vector<MlpFeatureMap::Layer> layers;
        layers.push_back({Matrix::Random(5, 2), Vector::Random(5)});
        layers.push_back({Matrix::Random(2, 5), Vector::Random(2)});
        const MlpFeatureMap fm(2, 2, Activation::tanh, std::move(layers));
        std::vector<Sample> data;
        for (int k = 0; k < 60; ++k) {
            Vector x(2);
            x << rng.uniform(-2, 2), rng.uniform(-2, 2);
            data.push_back({x, Vector::Zero(1), x});
        }
        const DecoderFit fit = fit_decoder(fm, data);
        CHECK((fit.C - identity_decoder(2, 4)).cwiseAbs().maxCoeff() < 1e-8);
        // Per-sample residual below 1e-8.
        for (const auto& s : data) {
            CHECK((fit.C * fm.evaluate(s.x) - s.x).norm() < 1e-8);
        }
    }

    SUBCASE("N_x == n identity features give C = I") {
        std::vector<Sample> data;
        for (int k = 0; k < 20; ++k) {
            Vector x(3);
            x << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
            data.push_back({x, Vector::Zero(1), x});
        }
        const IdentityFeatureMap lift(3);
        const DecoderFit fit = fit_decoder(lift, data);
        CHECK((fit.C - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
    }

    SUBCASE("huge ridge shrinks C toward zero") {
        std::vector<Sample> data;
        for (int k = 0; k < 20; ++k) {
            Vector x(2);
            x << rng.uniform(-1, 1), rng.uniform(-1, 1);
            data.push_back({x, Vector::Zero(1), x});
        }
        const IdentityFeatureMap lift(2);
        CHECK(fit_decoder(lift, data, 1e12).C.cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("fit_noise") {
    const IdentityFeatureMap lift(1);
    LinearEmbeddingModel model;
    model.A = Matrix::Zero(1, 1);
    model.B = Matrix::Zero(1, 1);
    model.C = Matrix::Identity(1, 1);

    auto sample_with_y = [](double y) {
        Vector x(1), u(1), yv(1);
        x << 0.0;
        u << 0.0;
        yv << y;
        return Sample{x, u, yv};
    };

    SUBCASE("zero residuals clamp at the variance floor") {
        const std::vector<Sample> data{sample_with_y(0), sample_with_y(0)};
        const GaussianNoiseModel noise = fit_noise(model, lift, data);
        CHECK(noise.sigma_x[0] == kVarianceFloor);
        CHECK(noise.sigma_z[0] == kVarianceFloor);
    }

    SUBCASE("residuals {-1, 1} give variance 1") {
        const std::vector<Sample> data{sample_with_y(-1), sample_with_y(1)};
        CHECK(fit_noise(model, lift, data).sigma_x[0] == doctest::Approx(1.0));
    }

    SUBCASE("residuals {0, 0, 3} give variance 3") {
        const std::vector<Sample> data{sample_with_y(0), sample_with_y(0),
                                       sample_with_y(3)};
        CHECK(fit_noise(model, lift, data).sigma_x[0] == doctest::Approx(3.0));
    }

    SUBCASE("needs two samples") {
        CHECK_THROWS_AS(fit_noise(model, lift, {sample_with_y(0)}), ConfigError);
    }
}

TEST_CASE("monomial_features") {
    Vector x(2);
    x << 2.0, 3.0;  // a = 2, b = 3

    SUBCASE("degree 2 ordering: (a, b, 1, a^2, ab, b^2)") {
        const Vector z = monomial_features(x, 2);
        REQUIRE(z.size() == 6);
        CHECK(z[0] == 2.0);
        CHECK(z[1] == 3.0);
        CHECK(z[2] == 1.0);
        CHECK(z[3] == 4.0);
        CHECK(z[4] == 6.0);
        CHECK(z[5] == 9.0);
    }

    SUBCASE("x = 0") {
        const Vector z = monomial_features(Vector::Zero(2), 2);
        CHECK(z[0] == 0.0);
        CHECK(z[1] == 0.0);
        CHECK(z[2] == 1.0);
        CHECK(z[3] == 0.0);
        CHECK(z[4] == 0.0);
        CHECK(z[5] == 0.0);
    }

    SUBCASE("degree 1") {
        const Vector z = monomial_features(x, 1);
        REQUIRE(z.size() == 3);
        CHECK(z[0] == 2.0);
        CHECK(z[1] == 3.0);
        CHECK(z[2] == 1.0);
    }

    SUBCASE("dimension formula") {
        CHECK(monomial_dim(2, 2) == 6);
        CHECK(monomial_dim(4, 2) == 15);
        CHECK(monomial_dim(2, 3) == 10);
        CHECK(MonomialFeatureMap(2, 2).lift_dim() == 6);
    }

    SUBCASE("degree 3 graded-lex block") {
        const Vector z = monomial_features(x, 3);
        REQUIRE(z.size() == 10);
        CHECK(z[6] == 8.0);    // a^3
        CHECK(z[7] == 12.0);   // a^2 b
        CHECK(z[8] == 18.0);   // a b^2
        CHECK(z[9] == 27.0);   // b^3
    }

    SUBCASE("max_degree must be >= 1") {
        CHECK_THROWS_AS(monomial_features(x, 0), ConfigError);
    }
}
