#include "doctest.h"

#include <cmath>

#include "vivid/covariance.hpp"

using namespace vivid;

namespace {

CovarianceMatrix random_psd(int n, Rng& rng) {
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    Eigen::MatrixXd m = a * a.transpose();
    m = 0.5 * (m + m.transpose().eval());
    return CovarianceMatrix(std::move(m));
}

}  // namespace

TEST_CASE("matern32 kernel values") {
    CHECK(matern32(0.0, 5.0) == 1.0);
    CHECK(matern32(5.0, 5.0) == doctest::Approx(2.0 / std::exp(1.0)).epsilon(1e-12));
    CHECK(matern32(10.0, 5.0) < matern32(5.0, 5.0));
    CHECK(matern32(5.0, 5.0) < matern32(0.0, 5.0));
    CHECK_THROWS_AS(matern32(1.0, 0.0), std::domain_error);
}

TEST_CASE("build_matern_cov entries") {
    const GridGeometry geom{2, 1};
    const CovarianceMatrix c = build_matern_cov(geom, 5.0, 1.0);
    CHECK(c.values()(0, 0) == 1.0);
    CHECK(c.values()(1, 1) == 1.0);
    CHECK(c.values()(0, 1) == doctest::Approx(1.2 * std::exp(-0.2)).epsilon(1e-12));
}

TEST_CASE("build_matern_cov diagonal carries sigma^2") {
    const GridGeometry geom{4, 3};
    const CovarianceMatrix c = build_matern_cov(geom, 2.0, 0.5);
    for (int i = 0; i < c.dim(); ++i) CHECK(c.values()(i, i) == 0.25);
}

TEST_CASE("build_matern_cov stays PSD up to a 20x20 grid") {
    for (int side : {5, 12, 20}) {
        const GridGeometry geom{side, side};
        const CovarianceMatrix c = build_matern_cov(geom, 5.0, 1.0);
        CHECK(c.is_psd());
    }
}

TEST_CASE("gaspari_cohn endpoint and branch values") {
    CHECK(gaspari_cohn(0.0) == 1.0);
    CHECK(gaspari_cohn(2.0) == 0.0);
    CHECK(gaspari_cohn(3.7) == 0.0);
    // Both polynomial branches at rho = 1 equal 5/24.
    const double left = 1.0 - 5.0 / 3.0 + 5.0 / 8.0 + 0.5 - 0.25;
    const double right = 4.0 - 5.0 + 5.0 / 3.0 + 5.0 / 8.0 - 0.5 + 1.0 / 12.0 - 2.0 / 3.0;
    CHECK(std::abs(left - 5.0 / 24.0) < 1e-15);
    CHECK(std::abs(right - 5.0 / 24.0) < 1e-15);
    CHECK(std::abs(gaspari_cohn(1.0) - 5.0 / 24.0) < 1e-12);
    CHECK_THROWS_AS(gaspari_cohn(-0.1), std::domain_error);
}

TEST_CASE("gaspari_cohn is continuous across the branch points") {
    for (double rho : {1.0, 2.0}) {
        const double eps = 1e-9;
        CHECK(std::abs(gaspari_cohn(rho - eps) - gaspari_cohn(rho + eps)) < 1e-7);
    }
}

TEST_CASE("localize keeps the diagonal and kills long range") {
    Rng rng(21);
    const GridGeometry geom{6, 6};
    const CovarianceMatrix p = random_psd(36, rng);
    const double L = 1.5;
    const CovarianceMatrix out = localize(p, geom, L);
    for (int i = 0; i < 36; ++i) CHECK(out.values()(i, i) == p.values()(i, i));
    for (int a = 0; a < 36; ++a)
        for (int b = 0; b < 36; ++b) {
            if (geom.distance(a, b) >= 2 * L) CHECK(out.values()(a, b) == 0.0);
            CHECK(std::abs(out.values()(a, b)) <= std::abs(p.values()(a, b)) + 1e-15);
        }
}

TEST_CASE("localize preserves positive semi-definiteness") {
    Rng rng(33);
    const GridGeometry geom{6, 6};
    for (int rep = 0; rep < 5; ++rep) {
        const CovarianceMatrix p = random_psd(36, rng);
        const CovarianceMatrix out = localize(p, geom, 2.0);
        CHECK(out.min_eigenvalue() >= -1e-8 * out.values().trace() / out.dim());
    }
}

TEST_CASE("empirical_cov hand values") {
    FlatVector r1(2), r2(2);
    r1 << 1, 0;
    r2 << -1, 0;
    const CovarianceMatrix c = empirical_cov({r1, r2});
    CHECK(c.values()(0, 0) == doctest::Approx(2.0));
    CHECK(c.values()(0, 1) == 0.0);
    CHECK(c.values()(1, 1) == 0.0);

    // Two identical residuals, uncentered: (n/(n-1)) r r^T.
    const CovarianceMatrix c2 = empirical_cov({r1, r1});
    CHECK(c2.values()(0, 0) == doctest::Approx(2.0));

    const CovarianceMatrix c3 = empirical_cov({FlatVector::Zero(3), FlatVector::Zero(3)});
    CHECK(c3.values().cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(empirical_cov({r1}), std::invalid_argument);
}

TEST_CASE("empirical_cov is permutation invariant") {
    Rng rng(4);
    std::vector<FlatVector> rs;
    for (int k = 0; k < 6; ++k) {
        FlatVector r(5);
        for (int i = 0; i < 5; ++i) r[i] = rng.normal();
        rs.push_back(r);
    }
    const CovarianceMatrix a = empirical_cov(rs);
    std::vector<FlatVector> shuffled = {rs[3], rs[0], rs[5], rs[1], rs[4], rs[2]};
    const CovarianceMatrix b = empirical_cov(shuffled);
    CHECK((a.values() - b.values()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sample_correlated_noise of the zero covariance is zero") {
    Rng rng(1);
    const CovarianceMatrix zero(Eigen::MatrixXd::Zero(4, 4));
    const FlatVector s = sample_correlated_noise(zero, rng);
    CHECK(s.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sampled noise reproduces the covariance") {
    Rng rng(99);
    const GridGeometry geom{2, 2};
    const CovarianceMatrix b = build_matern_cov(geom, 5.0, 1.0);
    const CorrelatedSampler sampler(b);

    const int n = 10000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(4, 4);
    for (int i = 0; i < n; ++i) {
        const FlatVector s = sampler.sample(rng);
        mean += s;
        second += s * s.transpose();
    }
    mean /= n;
    second /= n;

    // Component means within 4 standard errors of zero.
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(mean[i]) < 4.0 * std::sqrt(b.values()(i, i) / n));
    // Entrywise within 10% (all entries of this B are order one).
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(second(i, j) == doctest::Approx(b.values()(i, j)).epsilon(0.10));
}

TEST_CASE("covariance matrix rejects asymmetry") {
    Eigen::MatrixXd m(2, 2);
    m << 1.0, 0.5, 0.2, 1.0;
    CHECK_THROWS_AS(CovarianceMatrix{m}, std::invalid_argument);
}
