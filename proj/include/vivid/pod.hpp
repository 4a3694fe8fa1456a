#pragma once

#include <Eigen/Dense>

#include "vivid/covariance.hpp"
#include "vivid/field.hpp"
#include "vivid/obs_operator.hpp"

namespace vivid {

/// Truncated POD projection operator fitted to uncentered snapshots.
struct PodBasis {
    Eigen::MatrixXd modes;           // state_dim x q, orthonormal columns
    Eigen::VectorXd singular_values; // full spectrum, nonincreasing
    int q = 0;
    int n_state = 0;                 // number of snapshots the basis was fit on

    int state_dim() const { return static_cast<int>(modes.rows()); }
};

/// Thin SVD of the snapshot matrix (columns are flattened states; data is
/// used uncentered); keeps the leading q left singular vectors.
PodBasis fit_pod(const Eigen::MatrixXd& snapshots, int q);

/// x_hat = modes^T x.
Eigen::VectorXd encode(const PodBasis& basis, const FlatVector& x);

/// x = modes x_hat.
FlatVector decode(const PodBasis& basis, const Eigen::VectorXd& x_hat);

/// (energy conservation rate gamma, compression rate rho) at truncation q.
/// gamma sums squared singular values; rho = q / n_state.
std::pair<double, double> rates(const PodBasis& basis, int q);

/// modes^T B modes.
CovarianceMatrix reduce_cov(const PodBasis& basis, const CovarianceMatrix& B);

/// Observation operator composed with the decoder: H_hat(x_hat) = H(L x_hat).
class ReducedObsOperator final : public ObservationOperator {
public:
    ReducedObsOperator(const ObservationOperator& full, const PodBasis& basis)
        : full_(full), basis_(basis) {}

    int state_dim() const override { return basis_.q; }
    int obs_dim() const override { return full_.obs_dim(); }
    Eigen::VectorXd apply(const FlatVector& x_hat) const override {
        return full_.apply(decode(basis_, x_hat));
    }
    Eigen::MatrixXd jacobian_dense(const FlatVector& x_hat) const override {
        return full_.jacobian_dense(decode(basis_, x_hat)) * basis_.modes;
    }

private:
    const ObservationOperator& full_;
    const PodBasis& basis_;
};

}  // namespace vivid
