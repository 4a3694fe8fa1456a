#include "vivid/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace vivid {

double r_rmse(const FlatVector& estimate, const FlatVector& truth) {
    if (estimate.size() != truth.size())
        throw std::invalid_argument("r_rmse: length mismatch");
    const double denom = truth.norm();
    if (denom == 0.0)
        throw std::domain_error("r_rmse: truth has zero norm");
    return (estimate - truth).norm() / denom;
}

namespace {

constexpr int kWindow = 11;
constexpr int kRadius = kWindow / 2;

// Mirror index (edge not repeated): -1 -> 1, n -> n-2.
int mirror(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

std::vector<double> gaussian_kernel() {
    std::vector<double> k(kWindow);
    const double sigma = 1.5;
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kRadius;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable Gaussian blur with mirrored boundaries.
Eigen::MatrixXd blur(const Eigen::MatrixXd& in) {
    static const std::vector<double> k = gaussian_kernel();
    const int n = static_cast<int>(in.rows()), m = static_cast<int>(in.cols());
    Eigen::MatrixXd tmp(n, m), out(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int t = -kRadius; t <= kRadius; ++t)
                s += k[t + kRadius] * in(i, mirror(j + t, m));
            tmp(i, j) = s;
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int t = -kRadius; t <= kRadius; ++t)
                s += k[t + kRadius] * tmp(mirror(i + t, n), j);
            out(i, j) = s;
        }
    return out;
}

}  // namespace

double ssim(const StateField& a, const StateField& b, double dynamic_range) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("ssim: dimension mismatch");

    double d = dynamic_range;
    if (d <= 0.0) {
        const double ra = a.values().maxCoeff() - a.values().minCoeff();
        const double rb = b.values().maxCoeff() - b.values().minCoeff();
        d = std::max(ra, rb);
    }
    if (d <= 0.0) {
        // Both fields constant: identical means perfect similarity.
        return a.values() == b.values() ? 1.0 : 0.0;
    }

    const double c1 = (0.01 * d) * (0.01 * d);
    const double c2 = (0.03 * d) * (0.03 * d);

    const Eigen::MatrixXd& x = a.values();
    const Eigen::MatrixXd& y = b.values();

    const Eigen::MatrixXd mu_x = blur(x);
    const Eigen::MatrixXd mu_y = blur(y);
    const Eigen::MatrixXd xx = blur(x.cwiseProduct(x));
    const Eigen::MatrixXd yy = blur(y.cwiseProduct(y));
    const Eigen::MatrixXd xy = blur(x.cwiseProduct(y));

    double total = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) {
            const double mx = mu_x(i, j), my = mu_y(i, j);
            const double sx = xx(i, j) - mx * mx;
            const double sy = yy(i, j) - my * my;
            const double sxy = xy(i, j) - mx * my;
            const double num = (2.0 * mx * my + c1) * (2.0 * sxy + c2);
            const double den = (mx * mx + my * my + c1) * (sx + sy + c2);
            total += num / den;
        }
    return total / (a.rows() * a.cols());
}

MetricReport evaluate(const FlatVector& estimate, const FlatVector& truth,
                      int rows, int cols, double dynamic_range) {
    MetricReport r;
    r.r_rmse = r_rmse(estimate, truth);
    r.ssim = ssim(unflatten(estimate, rows, cols), unflatten(truth, rows, cols),
                  dynamic_range);
    return r;
}

}  // namespace vivid
