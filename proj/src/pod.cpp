#include "vivid/pod.hpp"

#include <stdexcept>

namespace vivid {

PodBasis fit_pod(const Eigen::MatrixXd& snapshots, int q) {
    const int n_state = static_cast<int>(snapshots.cols());
    const int dim = static_cast<int>(snapshots.rows());
    if (q < 1 || q > std::min(dim, n_state))
        throw std::invalid_argument("fit_pod: truncation out of range");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(snapshots, Eigen::ComputeThinU);
    PodBasis basis;
    basis.modes = svd.matrixU().leftCols(q);
    basis.singular_values = svd.singularValues();
    basis.q = q;
    basis.n_state = n_state;
    return basis;
}

Eigen::VectorXd encode(const PodBasis& basis, const FlatVector& x) {
    if (x.size() != basis.modes.rows())
        throw std::invalid_argument("encode: state length mismatch");
    return basis.modes.transpose() * x;
}

FlatVector decode(const PodBasis& basis, const Eigen::VectorXd& x_hat) {
    if (x_hat.size() != basis.q)
        throw std::invalid_argument("decode: latent length mismatch");
    return basis.modes * x_hat;
}

std::pair<double, double> rates(const PodBasis& basis, int q) {
    const int full = static_cast<int>(basis.singular_values.size());
    if (q < 0 || q > full)
        throw std::invalid_argument("rates: truncation out of range");
    const double total = basis.singular_values.array().square().sum();
    double kept = 0.0;
    for (int i = 0; i < q; ++i)
        kept += basis.singular_values[i] * basis.singular_values[i];
    const double gamma = total > 0.0 ? kept / total : 0.0;
    const double rho = basis.n_state > 0 ? static_cast<double>(q) / basis.n_state : 0.0;
    return {gamma, rho};
}

CovarianceMatrix reduce_cov(const PodBasis& basis, const CovarianceMatrix& B) {
    if (B.dim() != basis.modes.rows())
        throw std::invalid_argument("reduce_cov: dimension mismatch");
    Eigen::MatrixXd r = basis.modes.transpose() * B.values() * basis.modes;
    r = 0.5 * (r + r.transpose().eval());
    return CovarianceMatrix(std::move(r));
}

}  // namespace vivid
