#pragma once

#include <utility>
#include <vector>

#include "vivid/field.hpp"
#include "vivid/rng.hpp"

namespace vivid {

/// Full synthetic observation field; same shape as the generating state.
using ObservationField = Eigen::MatrixXd;

using SensorPosition = std::pair<int, int>;  // (row, col)

/// Sparse point observations: positions on the grid and observed values.
struct SensorSet {
    std::vector<SensorPosition> positions;
    Eigen::VectorXd values;

    int count() const { return static_cast<int>(positions.size()); }
};

/// Voronoi-filled observation image: every pixel carries the value of its
/// nearest sensor, and cell_index records the owning sensor.
struct TessellatedField {
    Eigen::MatrixXd values;
    Eigen::MatrixXi cell_index;

    int rows() const { return static_cast<int>(values.rows()); }
    int cols() const { return static_cast<int>(values.cols()); }
};

/// Sparse Jacobian of the sensor observations with respect to the flattened
/// state; row k only touches pixels within distance 3 of sensor k.
struct ObsJacobian {
    struct Triple {
        int row;
        int col;
        double value;
    };
    int rows = 0;
    int cols = 0;
    std::vector<Triple> triples;

    Eigen::MatrixXd to_dense() const;
};

/// Nonlinear observation field: a two-ring weighted sum of squared state
/// values. Ring 1 is the disk of radius 3 (weight 0.5), ring 2 the disk of
/// radius 1.5 (additional weight beta); both clip at the boundary.
ObservationField observe_full(const StateField& x, double beta);

/// One sensor near each node of a regular grid_n x grid_m lattice, displaced
/// by a uniform integer offset in [-r_s, r_s]^2 and clipped to the domain.
/// Collisions re-draw (bounded), then fall back to the lattice node, then to
/// the nearest free cell, so positions are always pairwise distinct.
std::vector<SensorPosition> place_sensors(int grid_n, int grid_m, int r_s,
                                          int rows, int cols, Rng& rng);

/// Read the observation field at the sensor positions.
SensorSet extract(const ObservationField& obs_field,
                  const std::vector<SensorPosition>& positions);

/// Assign every pixel to its Euclidean-nearest sensor (ties: lowest sensor
/// index) and fill the pixel with that sensor's value.
TessellatedField tessellate(const SensorSet& sensors, int rows, int cols);

/// Analytic Jacobian of extract(observe_full(x), positions) at x.
ObsJacobian obs_jacobian(const StateField& x, const std::vector<SensorPosition>& positions,
                         double beta);

/// Relative multiplicative noise: y_k <- y_k * (1 + level * zeta_k).
SensorSet add_observation_noise(const SensorSet& sensors, double level, Rng& rng);

namespace detail {
/// Integer offsets of the two observation rings (squared radii 9 and 2.25).
const std::vector<std::pair<int, int>>& ring1_offsets();
const std::vector<std::pair<int, int>>& ring2_offsets();
}  // namespace detail

}  // namespace vivid
