#include "vivid/observation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace vivid {

namespace detail {

namespace {
std::vector<std::pair<int, int>> offsets_within(double r2_max) {
    std::vector<std::pair<int, int>> out;
    const int r = static_cast<int>(std::floor(std::sqrt(r2_max)));
    for (int di = -r; di <= r; ++di)
        for (int dj = -r; dj <= r; ++dj)
            if (di * di + dj * dj <= r2_max) out.emplace_back(di, dj);
    return out;
}
}  // namespace

const std::vector<std::pair<int, int>>& ring1_offsets() {
    static const auto o = offsets_within(9.0);
    return o;
}

const std::vector<std::pair<int, int>>& ring2_offsets() {
    static const auto o = offsets_within(2.25);
    return o;
}

}  // namespace detail

Eigen::MatrixXd ObsJacobian::to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
    for (const Triple& t : triples) m(t.row, t.col) += t.value;
    return m;
}

ObservationField observe_full(const StateField& x, double beta) {
    const int n = x.rows(), m = x.cols();
    ObservationField y = ObservationField::Zero(n, m);
    const auto& r1 = detail::ring1_offsets();
    const auto& r2 = detail::ring2_offsets();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double s1 = 0.0;
            for (const auto& [di, dj] : r1) {
                const int a = i + di, b = j + dj;
                if (a < 0 || a >= n || b < 0 || b >= m) continue;
                s1 += x(a, b) * x(a, b);
            }
            double s2 = 0.0;
            for (const auto& [di, dj] : r2) {
                const int a = i + di, b = j + dj;
                if (a < 0 || a >= n || b < 0 || b >= m) continue;
                s2 += x(a, b) * x(a, b);
            }
            y(i, j) = 0.5 * s1 + beta * s2;
        }
    return y;
}

std::vector<SensorPosition> place_sensors(int grid_n, int grid_m, int r_s,
                                          int rows, int cols, Rng& rng) {
    if (grid_n < 1 || grid_m < 1)
        throw std::invalid_argument("place_sensors: empty sensor lattice");
    if (r_s < 0) throw std::invalid_argument("place_sensors: negative sample range");

    std::set<SensorPosition> taken;
    std::vector<SensorPosition> out;
    out.reserve(static_cast<std::size_t>(grid_n) * grid_m);

    auto clip = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };

    for (int a = 0; a < grid_n; ++a) {
        const int ni = clip(static_cast<int>(std::lround((a + 0.5) * rows / grid_n)), rows);
        for (int b = 0; b < grid_m; ++b) {
            const int nj = clip(static_cast<int>(std::lround((b + 0.5) * cols / grid_m)), cols);
            SensorPosition pos{ni, nj};
            bool placed = false;
            for (int attempt = 0; attempt < 20; ++attempt) {
                const int di = static_cast<int>(rng.uniform_int(-r_s, r_s));
                const int dj = static_cast<int>(rng.uniform_int(-r_s, r_s));
                SensorPosition cand{clip(ni + di, rows), clip(nj + dj, cols)};
                if (!taken.count(cand)) {
                    pos = cand;
                    placed = true;
                    break;
                }
            }
            if (!placed && taken.count(pos)) {
                // Lattice node is occupied too: take the nearest free cell
                // (deterministic scan order).
                long best = -1;
                SensorPosition best_pos{0, 0};
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j) {
                        if (taken.count({i, j})) continue;
                        const long d2 = static_cast<long>(i - ni) * (i - ni) +
                                        static_cast<long>(j - nj) * (j - nj);
                        if (best < 0 || d2 < best) {
                            best = d2;
                            best_pos = {i, j};
                        }
                    }
                if (best < 0)
                    throw std::runtime_error("place_sensors: more sensors than grid cells");
                pos = best_pos;
            }
            taken.insert(pos);
            out.push_back(pos);
        }
    }
    return out;
}

SensorSet extract(const ObservationField& obs_field,
                  const std::vector<SensorPosition>& positions) {
    SensorSet s;
    s.positions = positions;
    s.values.resize(static_cast<Eigen::Index>(positions.size()));
    for (std::size_t k = 0; k < positions.size(); ++k) {
        const auto [i, j] = positions[k];
        if (i < 0 || i >= obs_field.rows() || j < 0 || j >= obs_field.cols())
            throw std::out_of_range("extract: sensor position out of bounds");
        s.values[static_cast<Eigen::Index>(k)] = obs_field(i, j);
    }
    return s;
}

TessellatedField tessellate(const SensorSet& sensors, int rows, int cols) {
    if (sensors.count() < 1)
        throw std::invalid_argument("tessellate: empty sensor set");
    TessellatedField t;
    t.values.resize(rows, cols);
    t.cell_index.resize(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            long best = -1;
            int owner = 0;
            for (int k = 0; k < sensors.count(); ++k) {
                const auto [si, sj] = sensors.positions[static_cast<std::size_t>(k)];
                const long d2 = static_cast<long>(i - si) * (i - si) +
                                static_cast<long>(j - sj) * (j - sj);
                if (best < 0 || d2 < best) {
                    best = d2;
                    owner = k;
                }
            }
            t.cell_index(i, j) = owner;
            t.values(i, j) = sensors.values[owner];
        }
    return t;
}

ObsJacobian obs_jacobian(const StateField& x, const std::vector<SensorPosition>& positions,
                         double beta) {
    const int n = x.rows(), m = x.cols();
    ObsJacobian jac;
    jac.rows = static_cast<int>(positions.size());
    jac.cols = n * m;
    const auto& r1 = detail::ring1_offsets();
    for (int k = 0; k < jac.rows; ++k) {
        const auto [si, sj] = positions[static_cast<std::size_t>(k)];
        if (si < 0 || si >= n || sj < 0 || sj >= m)
            throw std::out_of_range("obs_jacobian: sensor position out of bounds");
        for (const auto& [di, dj] : r1) {
            const int a = si + di, b = sj + dj;
            if (a < 0 || a >= n || b < 0 || b >= m) continue;
            const bool inner = (di * di + dj * dj) <= 2.25;
            const double w = inner ? 0.5 + beta : 0.5;
            const double val = 2.0 * w * x(a, b);
            if (val != 0.0) jac.triples.push_back({k, a * m + b, val});
        }
    }
    return jac;
}

SensorSet add_observation_noise(const SensorSet& sensors, double level, Rng& rng) {
    if (level < 0.0)
        throw std::invalid_argument("add_observation_noise: negative level");
    SensorSet out = sensors;
    for (Eigen::Index k = 0; k < out.values.size(); ++k)
        out.values[k] = sensors.values[k] * (1.0 + level * rng.normal());
    return out;
}

}  // namespace vivid
