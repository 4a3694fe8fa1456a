#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "vivid/field.hpp"

namespace vivid {

/// Thrown when the explicit integration produces non-finite or non-physical
/// values; carries the offending step index.
class InstabilityError : public std::runtime_error {
public:
    InstabilityError(int step, const std::string& what)
        : std::runtime_error("instability at step " + std::to_string(step) + ": " + what),
          step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

/// Parameters of the damped Saint-Venant testbed.
///
/// The grid spacing is one cell; dt must satisfy dt*sqrt(g*h_max) < 1.
struct SweParams {
    double g = 1.0;        // gravity scale
    double b = 1.0;        // damping coefficient [1/s]
    double dt = 1e-6;      // time step [s]
    double h_still = 1.0;  // base water height [mm]
    double h_p = 0.1;      // cylinder surplus height [mm]
    double r_w = 4.0;      // cylinder radius [cells]
    int rows = 50;
    int cols = 50;
    // Cylinder center in grid coordinates; defaults to the geometric center
    // (N-1)/2 so that even grids stay mirror-symmetric.
    double center_row = -1.0;  // negative = use default
    double center_col = -1.0;

    double effective_center_row() const { return center_row < 0.0 ? 0.5 * (rows - 1) : center_row; }
    double effective_center_col() const { return center_col < 0.0 ? 0.5 * (cols - 1) : center_col; }

    void validate() const;
};

/// Coupled velocity/height state: u, v in 0.1 m/s, h in mm.
struct SweState {
    StateField u;
    StateField v;
    StateField h;
};

/// Saved u-component trajectory.
struct SnapshotSet {
    SweParams params;
    std::vector<int> times;  // step indices
    std::vector<StateField> fields;
};

/// Still water plus a raised cylinder of surplus height h_p and radius r_w.
SweState init_state(const SweParams& params);

/// One explicit Euler update with reflective walls (zero normal velocity,
/// zero flux through the boundary). `step_index` only labels errors.
SweState step(const SweState& state, const SweParams& params, int step_index = -1);

/// Integrate n_steps and record u every save_every steps (step indices
/// save_every, 2*save_every, ...). n_steps == 0 records the initial u.
SnapshotSet simulate(const SweParams& params, int n_steps, int save_every);

}  // namespace vivid
