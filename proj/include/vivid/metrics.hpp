#pragma once

#include "vivid/field.hpp"

namespace vivid {

struct MetricReport {
    double r_rmse = 0.0;
    double ssim = 0.0;
};

/// Relative RMSE: ||estimate - truth||_2 / ||truth||_2.
/// Throws std::domain_error when truth has zero norm.
double r_rmse(const FlatVector& estimate, const FlatVector& truth);

/// Structural similarity between two equally sized fields.
///
/// Windowed formulation: 11x11 Gaussian window (sigma 1.5), stabilizers
/// C1=(0.01*D)^2 and C2=(0.03*D)^2, mirror-padded boundaries, and the
/// global score is the mean of the local SSIM map.
///
/// `dynamic_range` supplies D. When <= 0, D is derived symmetrically from
/// the two inputs as max(range(a), range(b)) so that ssim(a,b) == ssim(b,a).
double ssim(const StateField& a, const StateField& b, double dynamic_range = 0.0);

MetricReport evaluate(const FlatVector& estimate, const FlatVector& truth,
                      int rows, int cols, double dynamic_range = 0.0);

}  // namespace vivid
