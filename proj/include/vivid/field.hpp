#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace vivid {

/// Flattened state vector (row-major ordering of a StateField).
using FlatVector = Eigen::VectorXd;

/// A 2-D physical field on a rows x cols grid.
///
/// Values are stored densely; construction rejects non-finite entries and
/// grids smaller than 2x2.
class StateField {
public:
    StateField(int rows, int cols)
        : values_(Eigen::MatrixXd::Zero(check_dims(rows, cols), cols)) {}

    explicit StateField(Eigen::MatrixXd values) : values_(std::move(values)) {
        check_dims(static_cast<int>(values_.rows()), static_cast<int>(values_.cols()));
        if (!values_.allFinite())
            throw std::invalid_argument("StateField: non-finite values");
    }

    int rows() const { return static_cast<int>(values_.rows()); }
    int cols() const { return static_cast<int>(values_.cols()); }
    int size() const { return rows() * cols(); }

    double operator()(int i, int j) const { return values_(i, j); }
    double& operator()(int i, int j) { return values_(i, j); }

    const Eigen::MatrixXd& values() const { return values_; }
    Eigen::MatrixXd& values() { return values_; }

    bool operator==(const StateField& o) const {
        return rows() == o.rows() && cols() == o.cols() && values_ == o.values_;
    }

private:
    static int check_dims(int rows, int cols) {
        if (rows < 2 || cols < 2)
            throw std::invalid_argument("StateField: grid must be at least 2x2");
        return rows;
    }

    Eigen::MatrixXd values_;
};

/// Row-major flattening: element (i, j) lands at index i*cols + j.
FlatVector flatten(const StateField& field);

/// Inverse of flatten; the vector length must equal rows*cols.
StateField unflatten(const FlatVector& x, int rows, int cols);

}  // namespace vivid
