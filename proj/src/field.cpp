#include "vivid/field.hpp"

namespace vivid {

FlatVector flatten(const StateField& field) {
    const int n = field.rows(), m = field.cols();
    FlatVector x(n * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            x[i * m + j] = field(i, j);
    return x;
}

StateField unflatten(const FlatVector& x, int rows, int cols) {
    if (x.size() != static_cast<Eigen::Index>(rows) * cols)
        throw std::invalid_argument("unflatten: length does not match grid dimensions");
    Eigen::MatrixXd v(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            v(i, j) = x[i * cols + j];
    return StateField(std::move(v));
}

}  // namespace vivid
