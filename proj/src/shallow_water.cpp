#include "vivid/shallow_water.hpp"

#include <cmath>

namespace vivid {

void SweParams::validate() const {
    if (rows < 2 || cols < 2)
        throw std::invalid_argument("SweParams: grid must be at least 2x2");
    if (dt <= 0.0) throw std::invalid_argument("SweParams: dt must be positive");
    if (r_w <= 0.0) throw std::invalid_argument("SweParams: r_w must be positive");
    if (h_p < 0.0) throw std::invalid_argument("SweParams: h_p must be nonnegative");
    if (h_still <= 0.0) throw std::invalid_argument("SweParams: h_still must be positive");
    const double h_max = h_still + h_p;
    if (dt * std::sqrt(g * h_max) >= 1.0)
        throw std::invalid_argument("SweParams: dt*sqrt(g*h_max) violates the stability bound");
    const double cr = effective_center_row(), cc = effective_center_col();
    if (cr < 0.0 || cr > rows - 1 || cc < 0.0 || cc > cols - 1)
        throw std::invalid_argument("SweParams: cylinder center outside the domain");
}

SweState init_state(const SweParams& params) {
    params.validate();
    const int n = params.rows, m = params.cols;
    const double cr = params.effective_center_row();
    const double cc = params.effective_center_col();
    const double r2 = params.r_w * params.r_w;

    Eigen::MatrixXd h = Eigen::MatrixXd::Constant(n, m, params.h_still);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            const double di = i - cr, dj = j - cc;
            if (di * di + dj * dj <= r2) h(i, j) += params.h_p;
        }
    return SweState{StateField(n, m), StateField(n, m), StateField(std::move(h))};
}

SweState step(const SweState& state, const SweParams& params, int step_index) {
    const int n = params.rows, m = params.cols;
    const Eigen::MatrixXd& u = state.u.values();
    const Eigen::MatrixXd& v = state.v.values();
    const Eigen::MatrixXd& h = state.h.values();
    const double dt = params.dt, g = params.g, b = params.b;

    Eigen::MatrixXd un = Eigen::MatrixXd::Zero(n, m);
    Eigen::MatrixXd vn = Eigen::MatrixXd::Zero(n, m);
    Eigen::MatrixXd hn(n, m);

    // Momentum: central dh on the interior, walls keep zero normal velocity.
    for (int i = 0; i < n; ++i)
        for (int j = 1; j < m - 1; ++j)
            un(i, j) = u(i, j) - dt * (g * 0.5 * (h(i, j + 1) - h(i, j - 1)) + b * u(i, j));
    for (int i = 1; i < n - 1; ++i)
        for (int j = 0; j < m; ++j)
            vn(i, j) = v(i, j) - dt * (g * 0.5 * (h(i + 1, j) - h(i - 1, j)) + b * v(i, j));

    // Height: flux form with centered interface fluxes and zero wall flux;
    // the column/row sums telescope, so total h is conserved.
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            const double fxl = (j == 0) ? 0.0 : 0.5 * (u(i, j - 1) * h(i, j - 1) + u(i, j) * h(i, j));
            const double fxr = (j == m - 1) ? 0.0 : 0.5 * (u(i, j) * h(i, j) + u(i, j + 1) * h(i, j + 1));
            const double fyt = (i == 0) ? 0.0 : 0.5 * (v(i - 1, j) * h(i - 1, j) + v(i, j) * h(i, j));
            const double fyb = (i == n - 1) ? 0.0 : 0.5 * (v(i, j) * h(i, j) + v(i + 1, j) * h(i + 1, j));
            hn(i, j) = h(i, j) - dt * ((fxr - fxl) + (fyb - fyt));
        }

    if (!un.allFinite() || !vn.allFinite() || !hn.allFinite())
        throw InstabilityError(step_index, "non-finite field values");
    if (hn.minCoeff() <= 0.0)
        throw InstabilityError(step_index, "water height reached zero");

    return SweState{StateField(std::move(un)), StateField(std::move(vn)),
                    StateField(std::move(hn))};
}

SnapshotSet simulate(const SweParams& params, int n_steps, int save_every) {
    params.validate();
    if (n_steps < 0) throw std::invalid_argument("simulate: negative step count");
    if (save_every < 1) throw std::invalid_argument("simulate: save_every must be >= 1");

    SnapshotSet out;
    out.params = params;
    SweState state = init_state(params);
    if (n_steps == 0) {
        out.times.push_back(0);
        out.fields.push_back(state.u);
        return out;
    }
    for (int s = 1; s <= n_steps; ++s) {
        state = step(state, params, s);
        if (s % save_every == 0) {
            out.times.push_back(s);
            out.fields.push_back(state.u);
        }
    }
    return out;
}

}  // namespace vivid
