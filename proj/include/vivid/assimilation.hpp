#pragma once

#include <optional>
#include <vector>

#include "vivid/covariance.hpp"
#include "vivid/field.hpp"
#include "vivid/obs_operator.hpp"

namespace vivid {

/// Extra penalty pulling the analysis toward a machine-learned state x_v,
/// weighted by the inverse of its error covariance P.
struct VividTerm {
    FlatVector x_v;
    CovarianceMatrix P;
};

/// One assimilation instance. Covariance factorizations happen once at
/// construction and are reused by every cost/gradient evaluation.
class AssimilationProblem {
public:
    AssimilationProblem(FlatVector x_b, CovarianceMatrix B, Eigen::VectorXd y,
                        CovarianceMatrix R, const ObservationOperator& obs_op,
                        std::optional<VividTerm> vivid_term = std::nullopt);

    int dim() const { return static_cast<int>(x_b_.size()); }
    bool has_vivid() const { return vivid_.has_value(); }

    const FlatVector& x_b() const { return x_b_; }
    const Eigen::VectorXd& y() const { return y_; }
    const ObservationOperator& obs_op() const { return obs_op_; }
    const VividTerm& vivid_term() const { return *vivid_; }

    double cost(const FlatVector& x) const;
    FlatVector gradient(const FlatVector& x) const;

    const SpdFactor& b_factor() const { return b_factor_; }
    const SpdFactor& r_factor() const { return r_factor_; }
    const SpdFactor& p_factor() const { return *p_factor_; }

private:
    FlatVector x_b_;
    Eigen::VectorXd y_;
    const ObservationOperator& obs_op_;
    std::optional<VividTerm> vivid_;
    SpdFactor b_factor_;
    SpdFactor r_factor_;
    std::optional<SpdFactor> p_factor_;
};

/// J(x) = 1/2 |x - x_b|^2_{B^-1} + 1/2 |y - H(x)|^2_{R^-1}; requires a
/// problem without the learned-operator term.
double cost_3dvar(const FlatVector& x, const AssimilationProblem& problem);

/// Analytic gradient of cost_3dvar: B^-1 (x - x_b) - H^T R^-1 (y - H(x)).
FlatVector grad_3dvar(const FlatVector& x, const AssimilationProblem& problem);

/// cost_3dvar plus 1/2 |x - x_v|^2_{P^-1}; requires the vivid term.
double cost_vivid(const FlatVector& x, const AssimilationProblem& problem);

FlatVector grad_vivid(const FlatVector& x, const AssimilationProblem& problem);

struct SolverConfig {
    double tol = 1e-6;   // gradient-norm stopping threshold
    int k_max = 200;     // iteration cap
    int memory = 10;     // quasi-Newton history length
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    int max_line_search = 50;
    enum class Hessian { lbfgs, gauss_newton };
    Hessian hessian = Hessian::lbfgs;
};

struct AssimilationResult {
    FlatVector x_a;
    int iterations = 0;  // line-search-accepted steps
    double final_cost = 0.0;
    bool converged = false;
    std::vector<double> cost_history;  // cost at x_b, then after each step
};

/// Quasi-Newton descent with strong-Wolfe line search, started at x_b.
/// Stops when the gradient norm drops below tol or k_max is reached; a
/// line-search failure returns the best iterate with converged = false.
AssimilationResult minimize(const AssimilationProblem& problem, const SolverConfig& cfg);

struct BlueResult {
    FlatVector x_a;
    Eigen::MatrixXd gain;      // K
    Eigen::MatrixXd posterior; // A = (I - K H) B
};

/// Closed-form analysis for a linear observation operator:
/// K = B H^T (H B H^T + R)^-1, x_a = x_b + K (y - H x_b).
BlueResult blue_analysis(const FlatVector& x_b, const Eigen::VectorXd& y,
                         const CovarianceMatrix& B, const CovarianceMatrix& R,
                         const Eigen::MatrixXd& H);

/// BLUE on the stacked system y_bar = (x_v; y), H_bar = (I; H),
/// R_bar = blockdiag(P, R).
BlueResult blue_augmented(const FlatVector& x_b, const Eigen::VectorXd& y,
                          const FlatVector& x_v, const CovarianceMatrix& B,
                          const CovarianceMatrix& R, const CovarianceMatrix& P,
                          const Eigen::MatrixXd& H);

/// Scalar posterior variances (A_da, A_vivid) of the two analyses.
/// A_vivid follows the full expanded expression and algebraically equals the
/// information form 1/(1/B + H^2/R + 1/P).
std::pair<double, double> scalar_posterior(double B, double R, double P, double H);

}  // namespace vivid
