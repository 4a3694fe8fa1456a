#include "doctest.h"

#include <cmath>

#include "vivid/assimilation.hpp"
#include "vivid/pod.hpp"
#include "vivid/rng.hpp"

using namespace vivid;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

CovarianceMatrix random_spd(int n, Rng& rng) {
    Eigen::MatrixXd a = random_matrix(n, n, rng);
    Eigen::MatrixXd m = a * a.transpose() + n * Eigen::MatrixXd::Identity(n, n);
    m = 0.5 * (m + m.transpose().eval());
    return CovarianceMatrix(std::move(m));
}

// A small nonlinear problem on an 8x8 grid with the quadratic sensor map.
struct SmallProblem {
    std::unique_ptr<QuadraticSensorOperator> op;
    std::unique_ptr<AssimilationProblem> problem;
};

SmallProblem make_small_problem(Rng& rng, bool with_vivid) {
    const int rows = 8, cols = 8, n = rows * cols;
    std::vector<SensorPosition> pos = {{1, 1}, {3, 6}, {6, 2}, {4, 4}, {7, 7}};
    auto op = std::make_unique<QuadraticSensorOperator>(rows, cols, pos, 0.5);

    FlatVector truth = random_matrix(n, 1, rng).col(0);
    FlatVector x_b = truth + 0.1 * random_matrix(n, 1, rng).col(0);
    const Eigen::VectorXd y = op->apply(truth);

    const GridGeometry geom{rows, cols};
    CovarianceMatrix B = build_matern_cov(geom, 3.0, 0.3);
    CovarianceMatrix R = CovarianceMatrix::identity(static_cast<int>(pos.size()), 0.01);

    std::optional<VividTerm> vivid;
    if (with_vivid) {
        FlatVector x_v = truth + 0.05 * random_matrix(n, 1, rng).col(0);
        vivid = VividTerm{x_v, build_matern_cov(geom, 2.0, 0.2)};
    }
    SmallProblem sp;
    sp.problem = std::make_unique<AssimilationProblem>(x_b, B, y, R, *op, vivid);
    sp.op = std::move(op);
    return sp;
}

double fd_gradient_error(const AssimilationProblem& p, const FlatVector& x) {
    const FlatVector g = p.gradient(x);
    const double h = 1e-6;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        FlatVector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (p.cost(xp) - p.cost(xm)) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
    }
    return worst;
}

}  // namespace

TEST_CASE("3D-Var cost vanishes at a consistent point") {
    Rng rng(1);
    SmallProblem sp = make_small_problem(rng, false);
    const FlatVector& xb = sp.problem->x_b();
    AssimilationProblem consistent(xb, random_spd(64, rng), sp.op->apply(xb),
                                   CovarianceMatrix::identity(5), *sp.op);
    CHECK(cost_3dvar(xb, consistent) == 0.0);
}

TEST_CASE("scalar 3D-Var hand case") {
    LinearObsOperator h(Eigen::MatrixXd::Identity(1, 1));
    FlatVector xb = FlatVector::Zero(1);
    Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 2.0);
    AssimilationProblem p(xb, CovarianceMatrix::identity(1), y,
                          CovarianceMatrix::identity(1), h);
    FlatVector x = FlatVector::Constant(1, 1.0);
    CHECK(cost_3dvar(x, p) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(grad_3dvar(x, p)[0]) < 1e-14);
}

TEST_CASE("doubling B halves the background term") {
    Rng rng(2);
    const int n = 16;
    LinearObsOperator h(Eigen::MatrixXd::Identity(n, n));
    const FlatVector xb = random_matrix(n, 1, rng).col(0);
    const FlatVector x = random_matrix(n, 1, rng).col(0);
    const CovarianceMatrix B = random_spd(n, rng);
    const CovarianceMatrix B2 = CovarianceMatrix(Eigen::MatrixXd(2.0 * B.values()));
    // Observation term zero: y = H(x).
    const Eigen::VectorXd y = h.apply(x);
    AssimilationProblem p1(xb, B, y, CovarianceMatrix::identity(n), h);
    AssimilationProblem p2(xb, B2, y, CovarianceMatrix::identity(n), h);
    CHECK(cost_3dvar(x, p2) == doctest::Approx(0.5 * cost_3dvar(x, p1)).epsilon(1e-12));
}

TEST_CASE("3D-Var gradient matches finite differences on random problems") {
    Rng rng(3);
    double worst = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
        SmallProblem sp = make_small_problem(rng, false);
        const FlatVector x = sp.problem->x_b() + 0.05 * random_matrix(64, 1, rng).col(0);
        worst = std::max(worst, fd_gradient_error(*sp.problem, x));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("VIVID gradient matches finite differences") {
    Rng rng(4);
    double worst = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
        SmallProblem sp = make_small_problem(rng, true);
        const FlatVector x = sp.problem->x_b() + 0.05 * random_matrix(64, 1, rng).col(0);
        worst = std::max(worst, fd_gradient_error(*sp.problem, x));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("scalar VIVID hand case") {
    LinearObsOperator h(Eigen::MatrixXd::Identity(1, 1));
    FlatVector xb = FlatVector::Zero(1);
    Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 1.0);
    VividTerm vivid{FlatVector::Constant(1, 1.0), CovarianceMatrix::identity(1)};
    AssimilationProblem p(xb, CovarianceMatrix::identity(1), y,
                          CovarianceMatrix::identity(1), h, vivid);
    const FlatVector x_star = FlatVector::Constant(1, 2.0 / 3.0);
    CHECK(cost_vivid(x_star, p) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(std::abs(grad_vivid(x_star, p)[0]) < 1e-14);

    CHECK_THROWS_AS(cost_3dvar(x_star, p), std::invalid_argument);
}

TEST_CASE("an uninformative learned term recovers plain 3D-Var") {
    Rng rng(5);
    const int rows = 8, cols = 8, n = rows * cols;
    std::vector<SensorPosition> pos = {{1, 1}, {3, 6}, {6, 2}};
    QuadraticSensorOperator op(rows, cols, pos, 0.5);

    const FlatVector truth = random_matrix(n, 1, rng).col(0);
    const FlatVector xb = truth + 0.1 * random_matrix(n, 1, rng).col(0);
    const FlatVector xv = truth + 0.05 * random_matrix(n, 1, rng).col(0);
    const Eigen::VectorXd y = op.apply(truth);
    const CovarianceMatrix B = random_spd(n, rng);
    const CovarianceMatrix R = CovarianceMatrix::identity(3, 0.01);

    AssimilationProblem plain(xb, B, y, R, op);
    VividTerm big{xv, CovarianceMatrix::identity(n, 1e8)};
    AssimilationProblem relaxed(xb, B, y, R, op, big);

    const FlatVector x = xb + 0.02 * random_matrix(n, 1, rng).col(0);
    CHECK(cost_vivid(x, relaxed) == doctest::Approx(cost_3dvar(x, plain)).epsilon(1e-6));
}

TEST_CASE("minimize with a huge tolerance returns the background untouched") {
    Rng rng(6);
    SmallProblem sp = make_small_problem(rng, false);
    SolverConfig cfg;
    cfg.tol = 1e6;
    const AssimilationResult res = minimize(*sp.problem, cfg);
    CHECK(res.iterations == 0);
    CHECK((res.x_a - sp.problem->x_b()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.converged);
}

TEST_CASE("accepted steps never increase the cost") {
    Rng rng(7);
    SmallProblem sp = make_small_problem(rng, true);
    SolverConfig cfg;
    cfg.tol = 1e-10;
    cfg.k_max = 150;
    const AssimilationResult res = minimize(*sp.problem, cfg);
    REQUIRE(res.cost_history.size() >= 2);
    for (std::size_t i = 1; i < res.cost_history.size(); ++i)
        CHECK(res.cost_history[i] <=
              res.cost_history[i - 1] + 1e-12 * (std::abs(res.cost_history[i - 1]) + 1.0));
    CHECK(res.final_cost <= res.cost_history.front() + 1e-12);
}

TEST_CASE("minimize matches BLUE on random linear problems") {
    Rng rng(8);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 12, k = 5;
        const Eigen::MatrixXd H = random_matrix(k, n, rng);
        const CovarianceMatrix B = random_spd(n, rng);
        const CovarianceMatrix R = random_spd(k, rng);
        const FlatVector xb = random_matrix(n, 1, rng).col(0);
        const Eigen::VectorXd y = random_matrix(k, 1, rng).col(0);

        const BlueResult blue = blue_analysis(xb, y, B, R, H);

        LinearObsOperator op(H);
        AssimilationProblem p(xb, B, y, R, op);
        SolverConfig cfg;
        cfg.tol = 1e-12;
        cfg.k_max = 500;
        const AssimilationResult res = minimize(p, cfg);
        CHECK((res.x_a - blue.x_a).norm() / blue.x_a.norm() < 1e-8);
    }
}

TEST_CASE("minimize matches augmented BLUE when the learned term is present") {
    Rng rng(9);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 10, k = 4;
        const Eigen::MatrixXd H = random_matrix(k, n, rng);
        const CovarianceMatrix B = random_spd(n, rng);
        const CovarianceMatrix R = random_spd(k, rng);
        const CovarianceMatrix P = random_spd(n, rng);
        const FlatVector xb = random_matrix(n, 1, rng).col(0);
        const FlatVector xv = random_matrix(n, 1, rng).col(0);
        const Eigen::VectorXd y = random_matrix(k, 1, rng).col(0);

        const BlueResult blue = blue_augmented(xb, y, xv, B, R, P, H);

        LinearObsOperator op(H);
        AssimilationProblem p(xb, B, y, R, op, VividTerm{xv, P});
        SolverConfig cfg;
        cfg.tol = 1e-12;
        cfg.k_max = 500;
        const AssimilationResult res = minimize(p, cfg);
        CHECK((res.x_a - blue.x_a).norm() / blue.x_a.norm() < 1e-8);
    }
}

TEST_CASE("gauss-newton mode agrees with the quasi-Newton path") {
    Rng rng(10);
    SmallProblem sp = make_small_problem(rng, true);
    SolverConfig lbfgs;
    lbfgs.tol = 1e-10;
    lbfgs.k_max = 300;
    SolverConfig gn = lbfgs;
    gn.hessian = SolverConfig::Hessian::gauss_newton;
    gn.k_max = 100;
    const AssimilationResult a = minimize(*sp.problem, lbfgs);
    const AssimilationResult b = minimize(*sp.problem, gn);
    CHECK((a.x_a - b.x_a).norm() / std::max(1.0, a.x_a.norm()) < 1e-6);
}

TEST_CASE("BLUE limits and hand values") {
    Rng rng(11);
    const int n = 6, k = 3;
    const Eigen::MatrixXd H = random_matrix(k, n, rng);
    const CovarianceMatrix B = random_spd(n, rng);
    const FlatVector xb = random_matrix(n, 1, rng).col(0);
    const Eigen::VectorXd y = random_matrix(k, 1, rng).col(0);

    // No confidence in the observations: x_a -> x_b.
    const BlueResult far = blue_analysis(xb, y, B, CovarianceMatrix::identity(k, 1e8), H);
    CHECK((far.x_a - xb).norm() < 1e-5 * xb.norm());

    // B = R = I, H = I: the analysis is the midpoint and A = I/2.
    const int m = 4;
    const FlatVector xb2 = random_matrix(m, 1, rng).col(0);
    const Eigen::VectorXd y2 = random_matrix(m, 1, rng).col(0);
    const BlueResult mid = blue_analysis(xb2, y2, CovarianceMatrix::identity(m),
                                         CovarianceMatrix::identity(m),
                                         Eigen::MatrixXd::Identity(m, m));
    CHECK((mid.x_a - 0.5 * (xb2 + y2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((mid.posterior - 0.5 * Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("analysis variance never exceeds background variance") {
    Rng rng(12);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 5, k = 3;
        const Eigen::MatrixXd H = random_matrix(k, n, rng);
        const CovarianceMatrix B = random_spd(n, rng);
        const CovarianceMatrix R = random_spd(k, rng);
        const FlatVector xb = random_matrix(n, 1, rng).col(0);
        const Eigen::VectorXd y = random_matrix(k, 1, rng).col(0);
        const BlueResult res = blue_analysis(xb, y, B, R, H);
        CHECK(res.posterior.trace() <= B.values().trace() + 1e-10);
    }
}

TEST_CASE("augmented BLUE reduces to plain BLUE for uninformative x_v") {
    Rng rng(13);
    const int n = 8, k = 3;
    const Eigen::MatrixXd H = random_matrix(k, n, rng);
    const CovarianceMatrix B = random_spd(n, rng);
    const CovarianceMatrix R = random_spd(k, rng);
    const FlatVector xb = random_matrix(n, 1, rng).col(0);
    const FlatVector xv = random_matrix(n, 1, rng).col(0);
    const Eigen::VectorXd y = random_matrix(k, 1, rng).col(0);

    const BlueResult plain = blue_analysis(xb, y, B, R, H);
    const BlueResult aug = blue_augmented(xb, y, xv, B, R,
                                          CovarianceMatrix::identity(n, 1e8), H);
    CHECK((aug.x_a - plain.x_a).norm() / plain.x_a.norm() < 1e-6);
}

TEST_CASE("augmented BLUE scalar posterior variance is 1/3") {
    const FlatVector xb = FlatVector::Zero(1);
    const FlatVector xv = FlatVector::Constant(1, 1.0);
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 1.0);
    const BlueResult res =
        blue_augmented(xb, y, xv, CovarianceMatrix::identity(1),
                       CovarianceMatrix::identity(1), CovarianceMatrix::identity(1),
                       Eigen::MatrixXd::Identity(1, 1));
    CHECK(res.posterior(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(res.x_a[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("scalar posterior formulas") {
    const auto [a_da, a_vivid] = scalar_posterior(1.0, 1.0, 1.0, 1.0);
    CHECK(std::abs(a_da - 0.5) < 1e-12);
    CHECK(std::abs(a_vivid - 1.0 / 3.0) < 1e-12);

    // P -> infinity recovers the plain analysis variance.
    const auto [da2, vivid2] = scalar_posterior(1.3, 0.7, 1e12, 0.9);
    CHECK(vivid2 == doctest::Approx(da2).epsilon(1e-6));

    CHECK_THROWS_AS(scalar_posterior(0.0, 1.0, 1.0, 1.0), std::domain_error);
}

TEST_CASE("expanded scalar expression equals the information form") {
    Rng rng(14);
    double worst = 0.0;
    for (int rep = 0; rep < 10000; ++rep) {
        const double B = 0.01 + 2.0 * rng.uniform();
        const double R = 0.01 + 2.0 * rng.uniform();
        const double P = 0.01 + 2.0 * rng.uniform();
        const double H = -2.0 + 4.0 * rng.uniform();
        const auto [a_da, a_vivid] = scalar_posterior(B, R, P, H);
        const double info = 1.0 / (1.0 / B + H * H / R + 1.0 / P);
        worst = std::max(worst, std::abs(a_vivid - info));
        CHECK(a_vivid <= a_da + 1e-12);
    }
    CHECK(worst < 1e-10);
}
