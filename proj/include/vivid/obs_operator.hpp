#pragma once

#include <Eigen/Dense>
#include <memory>

#include "vivid/field.hpp"
#include "vivid/observation.hpp"

namespace vivid {

/// Nonlinear state-observation map with Jacobian access.
class ObservationOperator {
public:
    virtual ~ObservationOperator() = default;
    virtual int state_dim() const = 0;
    virtual int obs_dim() const = 0;
    virtual Eigen::VectorXd apply(const FlatVector& x) const = 0;
    /// Dense Jacobian (obs_dim x state_dim) at x.
    virtual Eigen::MatrixXd jacobian_dense(const FlatVector& x) const = 0;
};

/// Plain linear operator y = H x.
class LinearObsOperator final : public ObservationOperator {
public:
    explicit LinearObsOperator(Eigen::MatrixXd H) : H_(std::move(H)) {}
    int state_dim() const override { return static_cast<int>(H_.cols()); }
    int obs_dim() const override { return static_cast<int>(H_.rows()); }
    Eigen::VectorXd apply(const FlatVector& x) const override { return H_ * x; }
    Eigen::MatrixXd jacobian_dense(const FlatVector&) const override { return H_; }
    const Eigen::MatrixXd& matrix() const { return H_; }

private:
    Eigen::MatrixXd H_;
};

/// The synthetic sensor operator: evaluate the two-ring squared-sum
/// observation field at the sensor sites only.
class QuadraticSensorOperator final : public ObservationOperator {
public:
    QuadraticSensorOperator(int rows, int cols, std::vector<SensorPosition> positions,
                            double beta)
        : rows_(rows), cols_(cols), positions_(std::move(positions)), beta_(beta) {}

    int state_dim() const override { return rows_ * cols_; }
    int obs_dim() const override { return static_cast<int>(positions_.size()); }
    Eigen::VectorXd apply(const FlatVector& x) const override;
    Eigen::MatrixXd jacobian_dense(const FlatVector& x) const override;

    const std::vector<SensorPosition>& positions() const { return positions_; }
    double beta() const { return beta_; }

private:
    int rows_, cols_;
    std::vector<SensorPosition> positions_;
    double beta_;
};

}  // namespace vivid
