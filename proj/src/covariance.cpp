#include "vivid/covariance.hpp"

#include <cmath>
#include <stdexcept>

namespace vivid {

CovarianceMatrix::CovarianceMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
    if (values_.rows() != values_.cols())
        throw std::invalid_argument("CovarianceMatrix: not square");
    if (!values_.allFinite())
        throw std::invalid_argument("CovarianceMatrix: non-finite entries");
    const double scale = std::max(1.0, values_.cwiseAbs().maxCoeff());
    const double asym = (values_ - values_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale)
        throw std::invalid_argument("CovarianceMatrix: not symmetric");
}

double CovarianceMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(values_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool CovarianceMatrix::is_psd(double tol_scale) const {
    const double tol = tol_scale * values_.trace() / dim();
    return min_eigenvalue() >= -tol;
}

double matern32(double r, double L) {
    if (L <= 0.0)
        throw std::domain_error("matern32: correlation length must be positive");
    const double s = r / L;
    return (1.0 + s) * std::exp(-s);
}

CovarianceMatrix build_matern_cov(const GridGeometry& geom, double L, double sigma) {
    const int n = geom.dim();
    const double s2 = sigma * sigma;
    Eigen::MatrixXd m(n, n);
    for (int a = 0; a < n; ++a) {
        m(a, a) = s2;
        for (int b = a + 1; b < n; ++b) {
            const double v = s2 * matern32(geom.distance(a, b), L);
            m(a, b) = v;
            m(b, a) = v;
        }
    }
    return CovarianceMatrix(std::move(m));
}

double gaspari_cohn(double rho) {
    if (rho < 0.0)
        throw std::domain_error("gaspari_cohn: negative distance ratio");
    if (rho >= 2.0) return 0.0;
    const double r2 = rho * rho, r3 = r2 * rho, r4 = r3 * rho, r5 = r4 * rho;
    if (rho < 1.0)
        return 1.0 - 5.0 / 3.0 * r2 + 5.0 / 8.0 * r3 + 0.5 * r4 - 0.25 * r5;
    return 4.0 - 5.0 * rho + 5.0 / 3.0 * r2 + 5.0 / 8.0 * r3 - 0.5 * r4 +
           r5 / 12.0 - 2.0 / (3.0 * rho);
}

CovarianceMatrix localize(const CovarianceMatrix& P, const GridGeometry& geom, double L) {
    if (P.dim() != geom.dim())
        throw std::invalid_argument("localize: covariance/geometry dimension mismatch");
    const int n = P.dim();
    const double support = 2.0 * L;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int a = 0; a < n; ++a) {
        m(a, a) = P.values()(a, a);
        for (int b = a + 1; b < n; ++b) {
            const double d = geom.distance(a, b);
            if (d >= support) continue;
            const double v = P.values()(a, b) * gaspari_cohn(d / L);
            m(a, b) = v;
            m(b, a) = v;
        }
    }
    return CovarianceMatrix(std::move(m));
}

CovarianceMatrix empirical_cov(const std::vector<FlatVector>& residuals) {
    const int n = static_cast<int>(residuals.size());
    if (n < 2)
        throw std::invalid_argument("empirical_cov: needs at least 2 samples");
    const Eigen::Index dim = residuals.front().size();
    Eigen::MatrixXd R(dim, n);
    for (int k = 0; k < n; ++k) {
        if (residuals[k].size() != dim)
            throw std::invalid_argument("empirical_cov: inconsistent residual lengths");
        R.col(k) = residuals[k];
    }
    Eigen::MatrixXd m = (R * R.transpose()) / (n - 1.0);
    m = 0.5 * (m + m.transpose().eval());  // kill rounding asymmetry
    return CovarianceMatrix(std::move(m));
}

SpdFactor::SpdFactor(const CovarianceMatrix& C) : dim_(C.dim()), use_llt_(false) {
    llt_.compute(C.values());
    if (llt_.info() == Eigen::Success) {
        use_llt_ = true;
        return;
    }
    const double jitter = 1e-10 * C.values().trace() / dim_;
    if (jitter > 0.0) {
        llt_.compute(C.values() + jitter * Eigen::MatrixXd::Identity(dim_, dim_));
        if (llt_.info() == Eigen::Success) {
            use_llt_ = true;
            return;
        }
    }
    // PSD (possibly singular) fallback.
    ldlt_.compute(C.values());
    const double tol = 1e-8 * std::max(0.0, C.values().trace()) / dim_ + 1e-300;
    if (ldlt_.info() != Eigen::Success || ldlt_.vectorD().minCoeff() < -tol)
        throw std::runtime_error("SpdFactor: matrix is not positive semi-definite");
}

Eigen::VectorXd SpdFactor::solve(const Eigen::VectorXd& rhs) const {
    return use_llt_ ? llt_.solve(rhs).eval() : ldlt_.solve(rhs).eval();
}

Eigen::MatrixXd SpdFactor::solve_matrix(const Eigen::MatrixXd& rhs) const {
    return use_llt_ ? llt_.solve(rhs).eval() : ldlt_.solve(rhs).eval();
}

double SpdFactor::quad(const Eigen::VectorXd& r) const {
    return r.dot(solve(r));
}

const Eigen::MatrixXd& SpdFactor::sqrt_factor() const {
    if (!sqrt_ready_) {
        if (use_llt_) {
            sqrt_ = llt_.matrixL();
        } else {
            const Eigen::VectorXd d = ldlt_.vectorD().cwiseMax(0.0).cwiseSqrt();
            Eigen::MatrixXd f = Eigen::MatrixXd(ldlt_.matrixL()) * d.asDiagonal();
            sqrt_ = ldlt_.transpositionsP().transpose() * f;
        }
        sqrt_ready_ = true;
    }
    return sqrt_;
}

FlatVector sample_correlated_noise(const CovarianceMatrix& B, Rng& rng) {
    return CorrelatedSampler(B).sample(rng);
}

FlatVector CorrelatedSampler::sample(Rng& rng) const {
    Eigen::VectorXd z(factor_.dim());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return factor_.sqrt_factor() * z;
}

}  // namespace vivid
