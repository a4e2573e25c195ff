#include "nplmc/error.hpp"
#include "nplmc/gp.hpp"

#include <gtest/gtest.h>

#include <Eigen/Cholesky>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

using namespace nplmc;

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

double kernel(double r, double tau2) {
    const double s = std::sqrt(5.0) * r;
    return tau2 * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

Mat3 inverse3(const Mat3 &a) {
    const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                       a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                       a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    Mat3 inv{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const int r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
            inv[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / det;
        }
    }
    return inv;
}

double determinant3(const Mat3 &a) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

} // namespace

TEST(Matern52, BasicProperties) {
    const std::vector<double> ls{0.3, 2.0};
    EXPECT_DOUBLE_EQ(matern52({0.1, 0.2}, {0.1, 0.2}, ls, 2.5), 2.5);
    EXPECT_LT(matern52({0.0, 0.0}, {100.0, 0.0}, ls, 2.5), 1e-100);
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        const std::vector<double> a{u(gen), u(gen)}, b{u(gen), u(gen)};
        EXPECT_DOUBLE_EQ(matern52(a, b, ls, 1.3), matern52(b, a, ls, 1.3));
        const double r = std::hypot((a[0] - b[0]) / 0.3, (a[1] - b[1]) / 2.0);
        EXPECT_NEAR(matern52(a, b, ls, 1.3), kernel(r, 1.3), 1e-14);
    }
}

TEST(GpModel, ThreePointExactAlgebra) {
    const std::vector<double> x{0.1, 0.45, 0.9};
    const std::vector<double> y{1.0, -0.5, 2.0};
    const std::vector<double> noise{0.01, 0.02, 0.0};
    const double ls = 0.4, tau2 = 1.7, jitter = 1e-8;
    const GpModel gp(1, x, y, noise, {{ls}, tau2, 0.0}, jitter);

    Mat3 K{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            K[i][j] = kernel(std::abs(x[i] - x[j]) / ls, tau2) + (i == j ? noise[i] + jitter : 0.0);
        }
    }
    const auto Ki = inverse3(K);
    double one_k_one = 0, one_k_y = 0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            one_k_one += Ki[i][j];
            one_k_y += Ki[i][j] * y[j];
        }
    }
    const double beta = one_k_y / one_k_one;
    EXPECT_NEAR(gp.hyper().mean, beta, 1e-10);

    double quad = 0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            quad += (y[i] - beta) * Ki[i][j] * (y[j] - beta);
        }
    }
    const double lml = -0.5 * quad - 0.5 * std::log(determinant3(K)) - 1.5 * std::log(2 * std::numbers::pi);
    EXPECT_NEAR(gp.log_likelihood(), lml, 1e-10);

    for (double q : {0.0, 0.3, 0.45, 0.7, 1.4}) {
        std::array<double, 3> ks{};
        for (int i = 0; i < 3; ++i) {
            ks[i] = kernel(std::abs(q - x[i]) / ls, tau2);
        }
        double mean = beta, var = tau2;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                mean += ks[i] * Ki[i][j] * (y[j] - beta);
                var -= ks[i] * Ki[i][j] * ks[j];
            }
        }
        const auto p = gp.predict(&q);
        EXPECT_NEAR(p.mean, mean, 1e-10) << q;
        EXPECT_NEAR(p.variance, var, 1e-10) << q;
        EXPECT_LE(p.variance, tau2);
    }
}

TEST(GpModel, InterpolatesNoiseFreeTargets) {
    const std::vector<double> x{0.0, 0.0, 0.3, 0.1, 0.7, 0.8, 1.0, 0.4};
    const std::vector<double> y{0.5, 1.5, -2.0, 0.25};
    const GpModel gp(2, x, y, std::vector<double>(4, 0.0), {{0.5, 0.5}, 1.0, 0.0}, 1e-12);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(gp.predict(&x[2 * i]).mean, y[i], 1e-6);
    }
}

TEST(GpModel, OrderInvariant) {
    const std::vector<double> x{0.1, 0.5, 0.9, 0.3};
    const std::vector<double> y{1.0, 2.0, 0.5, 1.5};
    const std::vector<double> n{0.1, 0.0, 0.2, 0.05};
    const GpModel a(1, x, y, n, {{0.3}, 1.0, 0.0});
    const GpModel b(1, {0.3, 0.9, 0.1, 0.5}, {1.5, 0.5, 1.0, 2.0}, {0.05, 0.2, 0.1, 0.0}, {{0.3}, 1.0, 0.0});
    for (double q = 0.0; q <= 1.0; q += 0.05) {
        EXPECT_NEAR(a.predict(&q).mean, b.predict(&q).mean, 1e-10);
        EXPECT_NEAR(a.predict(&q).variance, b.predict(&q).variance, 1e-10);
    }
    EXPECT_NEAR(a.log_likelihood(), b.log_likelihood(), 1e-10);
}

TEST(GpModel, RejectsBadShapes) {
    EXPECT_THROW(GpModel(2, {0.1, 0.2, 0.3}, {1.0, 2.0}, {0, 0}, {{1, 1}, 1, 0}), ValidationError);
    EXPECT_THROW(GpModel(1, {0.1}, {1.0}, {0}, {{-1.0}, 1, 0}), ValidationError);
}

TEST(FitGp, OptimumBeatsEveryStart) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(60), y(30), noise(30, 0.01);
    for (auto &v : x) {
        v = u(gen);
    }
    for (std::size_t i = 0; i < 30; ++i) {
        y[i] = std::sin(6 * x[2 * i]) + 0.3 * x[2 * i + 1];
    }
    GpFitReport report;
    const auto gp = fit_gp(2, x, y, noise, {}, &report);
    ASSERT_EQ(report.start_log_likelihood.size(), 8u);
    for (double s : report.start_log_likelihood) {
        EXPECT_GE(gp.log_likelihood(), s - 1e-9);
    }
    for (double s : report.end_log_likelihood) {
        EXPECT_GE(gp.log_likelihood(), s - 1e-9);
    }
    // The irrelevant-ish second input gets the longer lengthscale.
    EXPECT_GT(gp.hyper().lengthscales[1], gp.hyper().lengthscales[0]);
}

TEST(FitGp, RecoversKnownLengthscale) {
    const double ls = 0.3, tau2 = 1.0, noise = 0.01;
    const int n = 80, seeds = 50;
    int good = 0;
    for (int s = 0; s < seeds; ++s) {
        std::mt19937_64 gen(1000 + s);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::normal_distribution<double> z;
        std::vector<double> x(n);
        for (auto &v : x) {
            v = u(gen);
        }
        Eigen::MatrixXd K(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                K(i, j) = kernel(std::abs(x[i] - x[j]) / ls, tau2) + (i == j ? noise + 1e-10 : 0.0);
            }
        }
        const Eigen::MatrixXd L = K.llt().matrixL();
        Eigen::VectorXd e(n);
        for (int i = 0; i < n; ++i) {
            e(i) = z(gen);
        }
        const Eigen::VectorXd draw = L * e;
        const std::vector<double> y(draw.data(), draw.data() + n);
        const auto gp = fit_gp(1, x, y, std::vector<double>(n, noise));
        const double got = gp.hyper().lengthscales[0];
        good += got > ls / 2 && got < ls * 2;
    }
    EXPECT_GE(good, 40);
}
