#include "vivid/assimilation.hpp"

#include <cmath>
#include <stdexcept>

namespace vivid {

AssimilationProblem::AssimilationProblem(FlatVector x_b, CovarianceMatrix B,
                                         Eigen::VectorXd y, CovarianceMatrix R,
                                         const ObservationOperator& obs_op,
                                         std::optional<VividTerm> vivid_term)
    : x_b_(std::move(x_b)),
      y_(std::move(y)),
      obs_op_(obs_op),
      vivid_(std::move(vivid_term)),
      b_factor_(B),
      r_factor_(R) {
    const int n = static_cast<int>(x_b_.size());
    if (B.dim() != n || obs_op_.state_dim() != n)
        throw std::invalid_argument("AssimilationProblem: state dimensions disagree");
    if (R.dim() != y_.size() || obs_op_.obs_dim() != y_.size())
        throw std::invalid_argument("AssimilationProblem: observation dimensions disagree");
    if (vivid_) {
        if (vivid_->x_v.size() != n || vivid_->P.dim() != n)
            throw std::invalid_argument("AssimilationProblem: vivid term dimensions disagree");
        p_factor_.emplace(vivid_->P);
    }
}

double AssimilationProblem::cost(const FlatVector& x) const {
    double c = 0.5 * b_factor_.quad(x - x_b_);
    c += 0.5 * r_factor_.quad(y_ - obs_op_.apply(x));
    if (vivid_) c += 0.5 * p_factor_->quad(x - vivid_->x_v);
    return c;
}

FlatVector AssimilationProblem::gradient(const FlatVector& x) const {
    FlatVector g = b_factor_.solve(x - x_b_);
    const Eigen::MatrixXd H = obs_op_.jacobian_dense(x);
    g.noalias() -= H.transpose() * r_factor_.solve(y_ - obs_op_.apply(x));
    if (vivid_) g += p_factor_->solve(x - vivid_->x_v);
    return g;
}

double cost_3dvar(const FlatVector& x, const AssimilationProblem& problem) {
    if (problem.has_vivid())
        throw std::invalid_argument("cost_3dvar: problem carries a learned-operator term");
    return problem.cost(x);
}

FlatVector grad_3dvar(const FlatVector& x, const AssimilationProblem& problem) {
    if (problem.has_vivid())
        throw std::invalid_argument("grad_3dvar: problem carries a learned-operator term");
    return problem.gradient(x);
}

double cost_vivid(const FlatVector& x, const AssimilationProblem& problem) {
    if (!problem.has_vivid())
        throw std::invalid_argument("cost_vivid: problem lacks the learned-operator term");
    return problem.cost(x);
}

FlatVector grad_vivid(const FlatVector& x, const AssimilationProblem& problem) {
    if (!problem.has_vivid())
        throw std::invalid_argument("grad_vivid: problem lacks the learned-operator term");
    return problem.gradient(x);
}

namespace {

struct Trial {
    double alpha = 0.0;
    double f = 0.0;
    double df = 0.0;  // directional derivative
    FlatVector x;
    FlatVector g;
    bool has_g = false;
};

struct LineSearchOutcome {
    bool accepted = false;
    Trial point;
};

// Strong-Wolfe line search (bracket + zoom). Falls back to accepting a
// sufficient-decrease point when the curvature condition cannot be met
// within the evaluation budget; the step then still decreases the cost.
class WolfeSearch {
public:
    WolfeSearch(const AssimilationProblem& p, const SolverConfig& cfg)
        : p_(p), cfg_(cfg) {}

    LineSearchOutcome run(const FlatVector& x0, double f0, const FlatVector& g0,
                          const FlatVector& d) {
        evals_ = 0;
        phi0_ = f0;
        dphi0_ = g0.dot(d);
        if (!(dphi0_ < 0.0)) return {};

        Trial prev;
        prev.alpha = 0.0;
        prev.f = f0;
        prev.df = dphi0_;

        double alpha = 1.0;
        for (int iter = 0; evals_ < cfg_.max_line_search; ++iter) {
            Trial cur = eval(x0, d, alpha, /*need_grad=*/false);
            if (cur.f > phi0_ + cfg_.wolfe_c1 * alpha * dphi0_ || (iter > 0 && cur.f >= prev.f)) {
                if (auto flat = accept_at_noise_floor(cur, d); flat.accepted) return flat;
                return zoom(x0, d, prev, cur);
            }
            fill_grad(cur, d);
            if (std::abs(cur.df) <= -cfg_.wolfe_c2 * dphi0_) return {true, std::move(cur)};
            if (cur.df >= 0.0) return zoom(x0, d, cur, prev);
            prev = std::move(cur);
            alpha *= 2.0;
        }
        return sufficient_decrease_fallback(std::move(prev));
    }

private:
    Trial eval(const FlatVector& x0, const FlatVector& d, double alpha, bool need_grad) {
        Trial t;
        t.alpha = alpha;
        t.x = x0 + alpha * d;
        t.f = p_.cost(t.x);
        ++evals_;
        if (need_grad) fill_grad(t, d);
        return t;
    }

    void fill_grad(Trial& t, const FlatVector& d) {
        if (!t.has_g) {
            t.g = p_.gradient(t.x);
            t.df = t.g.dot(d);
            t.has_g = true;
        }
    }

    // Near the minimum the cost differences sink below double rounding while
    // the gradient still carries signal; accept a curvature-satisfying step
    // whose cost is flat to within the noise floor (Hager-Zhang style).
    LineSearchOutcome accept_at_noise_floor(Trial& cur, const FlatVector& d) {
        const double noise = 1e-12 * (std::abs(phi0_) + 1.0);
        if (cur.f > phi0_ + noise) return {};
        fill_grad(cur, d);
        if (std::abs(cur.df) <= -cfg_.wolfe_c2 * dphi0_) return {true, std::move(cur)};
        return {};
    }

    LineSearchOutcome zoom(const FlatVector& x0, const FlatVector& d, Trial lo, Trial hi) {
        while (evals_ < cfg_.max_line_search) {
            if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, std::abs(lo.alpha)))
                break;
            const double alpha = interpolate(lo, hi);
            Trial cur = eval(x0, d, alpha, false);
            if (cur.f > phi0_ + cfg_.wolfe_c1 * alpha * dphi0_ || cur.f >= lo.f) {
                if (auto flat = accept_at_noise_floor(cur, d); flat.accepted) return flat;
                hi = std::move(cur);
            } else {
                fill_grad(cur, d);
                if (std::abs(cur.df) <= -cfg_.wolfe_c2 * dphi0_) return {true, std::move(cur)};
                if (cur.df * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = std::move(cur);
            }
        }
        return sufficient_decrease_fallback(std::move(lo));
    }

    LineSearchOutcome sufficient_decrease_fallback(Trial best) {
        if (best.alpha > 0.0 &&
            best.f <= phi0_ + cfg_.wolfe_c1 * best.alpha * dphi0_ && best.x.size() > 0)
            return {true, std::move(best)};
        return {};
    }

    // Quadratic interpolation from the lo point, safeguarded to stay well
    // inside the bracket.
    double interpolate(const Trial& lo, const Trial& hi) const {
        const double a = lo.alpha, b = hi.alpha;
        double cand = 0.5 * (a + b);
        if (lo.has_g) {
            const double denom = 2.0 * (hi.f - lo.f - lo.df * (b - a));
            if (denom != 0.0) {
                const double q = a - lo.df * (b - a) * (b - a) / denom;
                const double left = std::min(a, b), right = std::max(a, b);
                const double margin = 0.1 * (right - left);
                if (q > left + margin && q < right - margin) cand = q;
            }
        }
        return cand;
    }

    const AssimilationProblem& p_;
    const SolverConfig& cfg_;
    int evals_ = 0;
    double phi0_ = 0.0;
    double dphi0_ = 0.0;
};

// Two-loop recursion for the L-BFGS direction.
class LbfgsHistory {
public:
    explicit LbfgsHistory(int memory) : memory_(memory) {}

    void clear() { pairs_.clear(); }

    void push(FlatVector s, FlatVector y) {
        const double sy = s.dot(y);
        if (sy <= 1e-12 * s.norm() * y.norm()) return;  // keep curvature positive
        pairs_.push_back({std::move(s), std::move(y), 1.0 / sy});
        if (static_cast<int>(pairs_.size()) > memory_) pairs_.erase(pairs_.begin());
    }

    FlatVector direction(const FlatVector& g) const {
        if (pairs_.empty()) return -g;
        FlatVector q = g;
        std::vector<double> alpha(pairs_.size());
        for (int i = static_cast<int>(pairs_.size()) - 1; i >= 0; --i) {
            alpha[i] = pairs_[i].rho * pairs_[i].s.dot(q);
            q -= alpha[i] * pairs_[i].y;
        }
        const auto& last = pairs_.back();
        const double gamma = last.s.dot(last.y) / last.y.dot(last.y);
        FlatVector r = gamma * q;
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            const double beta = pairs_[i].rho * pairs_[i].y.dot(r);
            r += (alpha[i] - beta) * pairs_[i].s;
        }
        return -r;
    }

private:
    struct Pair {
        FlatVector s, y;
        double rho;
    };
    int memory_;
    std::vector<Pair> pairs_;
};

// Newton matrix of the quadratic model: B^-1 + H^T R^-1 H (+ P^-1) with H
// frozen at the current iterate.
Eigen::MatrixXd gauss_newton_matrix(const AssimilationProblem& p, const FlatVector& x) {
    const int n = p.dim();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd m = p.b_factor().solve_matrix(eye);
    const Eigen::MatrixXd H = p.obs_op().jacobian_dense(x);
    m.noalias() += H.transpose() * p.r_factor().solve_matrix(H);
    if (p.has_vivid()) m += p.p_factor().solve_matrix(eye);
    return m;
}

}  // namespace

AssimilationResult minimize(const AssimilationProblem& problem, const SolverConfig& cfg) {
    if (cfg.tol <= 0.0 || cfg.k_max < 1 || cfg.memory < 1)
        throw std::invalid_argument("minimize: invalid solver configuration");

    AssimilationResult res;
    FlatVector x = problem.x_b();
    double fx = problem.cost(x);
    FlatVector g = problem.gradient(x);
    res.cost_history.push_back(fx);

    LbfgsHistory history(cfg.memory);
    WolfeSearch search(problem, cfg);

    while (res.iterations < cfg.k_max && g.norm() > cfg.tol) {
        FlatVector d;
        if (cfg.hessian == SolverConfig::Hessian::gauss_newton) {
            d = Eigen::LDLT<Eigen::MatrixXd>(gauss_newton_matrix(problem, x)).solve(-g);
        } else {
            d = history.direction(g);
        }
        if (!(d.dot(g) < 0.0)) {
            history.clear();
            d = -g;
        }

        LineSearchOutcome ls = search.run(x, fx, g, d);
        if (!ls.accepted) break;  // return the best iterate found so far

        if (!ls.point.has_g) ls.point.g = problem.gradient(ls.point.x);
        history.push(ls.point.x - x, ls.point.g - g);
        x = std::move(ls.point.x);
        fx = ls.point.f;
        g = std::move(ls.point.g);
        ++res.iterations;
        res.cost_history.push_back(fx);
    }

    res.x_a = std::move(x);
    res.final_cost = fx;
    res.converged = g.norm() <= cfg.tol;
    return res;
}

namespace {

BlueResult blue_core(const FlatVector& x_b, const Eigen::VectorXd& y,
                     const Eigen::MatrixXd& B, const Eigen::MatrixXd& R,
                     const Eigen::MatrixXd& H) {
    const Eigen::Index n = x_b.size(), k = y.size();
    if (H.rows() != k || H.cols() != n || B.rows() != n || R.rows() != k)
        throw std::invalid_argument("blue_analysis: dimension mismatch");

    Eigen::MatrixXd S = H * B * H.transpose() + R;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    const double dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !(dmax > 0.0) ||
        ldlt.vectorD().cwiseAbs().minCoeff() < 1e-14 * dmax)
        throw std::runtime_error("blue_analysis: singular innovation matrix");

    // K = B H^T S^-1 computed through solves on the symmetric S.
    Eigen::MatrixXd K = ldlt.solve(H * B).transpose();
    BlueResult res;
    res.x_a = x_b + K * (y - H * x_b);
    res.posterior = (Eigen::MatrixXd::Identity(n, n) - K * H) * B;
    res.gain = std::move(K);
    return res;
}

}  // namespace

BlueResult blue_analysis(const FlatVector& x_b, const Eigen::VectorXd& y,
                         const CovarianceMatrix& B, const CovarianceMatrix& R,
                         const Eigen::MatrixXd& H) {
    return blue_core(x_b, y, B.values(), R.values(), H);
}

BlueResult blue_augmented(const FlatVector& x_b, const Eigen::VectorXd& y,
                          const FlatVector& x_v, const CovarianceMatrix& B,
                          const CovarianceMatrix& R, const CovarianceMatrix& P,
                          const Eigen::MatrixXd& H) {
    const Eigen::Index n = x_b.size(), k = y.size();
    if (x_v.size() != n)
        throw std::invalid_argument("blue_augmented: x_v length mismatch");

    Eigen::VectorXd y_bar(n + k);
    y_bar << x_v, y;
    Eigen::MatrixXd h_bar(n + k, n);
    h_bar << Eigen::MatrixXd::Identity(n, n), H;
    Eigen::MatrixXd r_bar = Eigen::MatrixXd::Zero(n + k, n + k);
    r_bar.topLeftCorner(n, n) = P.values();
    r_bar.bottomRightCorner(k, k) = R.values();

    return blue_core(x_b, y_bar, B.values(), r_bar, h_bar);
}

std::pair<double, double> scalar_posterior(double B, double R, double P, double H) {
    if (B <= 0.0 || R <= 0.0 || P <= 0.0)
        throw std::domain_error("scalar_posterior: B, R, P must be positive");

    const double da_den = B * H * H + R;
    if (da_den == 0.0) throw std::domain_error("scalar_posterior: zero denominator");
    const double a_da = B * R / da_den;

    // Expanded posterior variance of the augmented analysis, kept in its
    // long written-out form; it reduces to 1/(1/B + H^2/R + 1/P).
    const double den = B * H * H * P + B * R + P * R;
    if (den == 0.0) throw std::domain_error("scalar_posterior: zero denominator");
    const double a_vivid =
        B * ((B * B * H * H) / den - (B * (B * H * H + R)) / den -
             H * (-(B * B * H) / den + (B * H * (B + P)) / den) + 1.0);

    return {a_da, a_vivid};
}

}  // namespace vivid
