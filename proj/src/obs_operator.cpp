#include "vivid/obs_operator.hpp"

namespace vivid {

// Accumulation matches observe_full exactly so that applying the operator
// to a state reproduces the extracted pipeline values bit-for-bit.
Eigen::VectorXd QuadraticSensorOperator::apply(const FlatVector& x) const {
    const StateField f = unflatten(x, rows_, cols_);
    const auto& r1 = detail::ring1_offsets();
    const auto& r2 = detail::ring2_offsets();
    Eigen::VectorXd y(obs_dim());
    for (int k = 0; k < obs_dim(); ++k) {
        const auto [si, sj] = positions_[static_cast<std::size_t>(k)];
        double s1 = 0.0;
        for (const auto& [di, dj] : r1) {
            const int a = si + di, b = sj + dj;
            if (a < 0 || a >= rows_ || b < 0 || b >= cols_) continue;
            s1 += f(a, b) * f(a, b);
        }
        double s2 = 0.0;
        for (const auto& [di, dj] : r2) {
            const int a = si + di, b = sj + dj;
            if (a < 0 || a >= rows_ || b < 0 || b >= cols_) continue;
            s2 += f(a, b) * f(a, b);
        }
        y[k] = 0.5 * s1 + beta_ * s2;
    }
    return y;
}

Eigen::MatrixXd QuadraticSensorOperator::jacobian_dense(const FlatVector& x) const {
    return obs_jacobian(unflatten(x, rows_, cols_), positions_, beta_).to_dense();
}

}  // namespace vivid
