#include "glaves/glaves.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "glaves/rng.hpp"

namespace glaves {

namespace {

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Type-7 quantile (linear interpolation between order statistics).
double quantile(std::vector<double>& values, double q) {
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - std::floor(h);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

}  // namespace

GroupStructure GroupStructure::make(int p) {
    GroupStructure gs;
    gs.p = p;
    gs.groups.resize(static_cast<std::size_t>(2 * p + 2));
    for (int j = 0; j < p; ++j) gs.groups[static_cast<std::size_t>(j)] = {gs.beta_main(j)};
    for (int j = 0; j < p; ++j)
        gs.groups[static_cast<std::size_t>(p + j)] = {gs.beta_interaction(j), gs.gamma(j)};
    gs.groups[static_cast<std::size_t>(2 * p)] = {gs.beta_intercept(), gs.gamma_intercept()};
    gs.groups[static_cast<std::size_t>(2 * p + 1)] = {gs.beta_treatment()};
    return gs;
}

AdaptiveWeights adaptive_weights(const FullModelCoefficients& full_model, int p,
                                 VMode mode) {
    if (full_model.v.size() != 2 * p + 2)
        throw std::invalid_argument("full-model coefficient vector has wrong length");

    AdaptiveWeights aw;
    aw.w = Vector::Zero(2 * p + 2);
    aw.v = Vector::Zero(2 * p);
    for (int k = 0; k < p; ++k) {
        const double denom =
            mode == VMode::Grouped ? full_model.v(k) : full_model.v(p + k);
        aw.v(k) = std::max(std::abs(denom), kCoefficientFloor);
        aw.w(k) = 1.0 / aw.v(k);
    }
    const double sqrt2 = std::sqrt(2.0);
    for (int k = p; k < 2 * p; ++k) {
        aw.v(k) = std::max(std::abs(full_model.v(k)), kCoefficientFloor);
        aw.w(k) = sqrt2 / aw.v(k);
    }
    return aw;
}

JointObjective::JointObjective(const ExperimentalSample& scaled_exp,
                               const TargetSample& scaled_tgt,
                               const std::optional<NormalizedWeights>& omega,
                               SelectionLoss loss)
    : p_(static_cast<int>(scaled_exp.p())),
      n_(scaled_exp.n()),
      m_(scaled_tgt.m()),
      loss_(loss) {
    u_ = outcome_design(scaled_exp);
    y_ = scaled_exp.y;
    utu_ = u_.transpose() * u_;
    uty_ = u_.transpose() * y_;
    yty_ = y_.squaredNorm();

    v_.resize(n_ + m_, p_ + 1);
    v_.topLeftCorner(n_, p_) = scaled_exp.x;
    v_.bottomLeftCorner(m_, p_) = scaled_tgt.x_star;
    v_.col(p_).setOnes();

    labels_.setZero(n_ + m_);
    labels_.head(n_).setOnes();

    row_weight_.setOnes(n_ + m_);
    if (omega) {
        if (omega->omega.size() != m_)
            throw std::invalid_argument("weight vector length mismatch");
        row_weight_.tail(m_) = omega->omega;
    }

    eta_.resize(n_ + m_);
    dloss_.resize(n_ + m_);
    scratch_.resize(2 * p_ + 2);
}

double JointObjective::selection_loss_value(const Vector& eta) const {
    double total = 0.0;
    if (loss_ == SelectionLoss::Bernoulli) {
        for (Index i = 0; i < eta.size(); ++i)
            total += row_weight_(i) * (softplus(eta(i)) - labels_(i) * eta(i));
    } else {
        for (Index i = 0; i < eta.size(); ++i) {
            const double sign = 2.0 * labels_(i) - 1.0;
            total += row_weight_(i) * softplus(-2.0 * sign * eta(i));
        }
    }
    return total;
}

void JointObjective::selection_loss_derivative(const Vector& eta, Vector& out) const {
    if (loss_ == SelectionLoss::Bernoulli) {
        for (Index i = 0; i < eta.size(); ++i)
            out(i) = row_weight_(i) * (sigmoid(eta(i)) - labels_(i));
    } else {
        for (Index i = 0; i < eta.size(); ++i) {
            const double sign = 2.0 * labels_(i) - 1.0;
            out(i) = row_weight_(i) * (-2.0 * sign * sigmoid(-2.0 * sign * eta(i)));
        }
    }
}

double JointObjective::value(const Vector& alpha) const {
    const auto beta = alpha.head(2 * p_ + 2);
    const auto gamma = alpha.tail(p_ + 1);
    scratch_.noalias() = utu_ * beta;
    const double outcome = (yty_ - 2.0 * beta.dot(uty_) + beta.dot(scratch_)) /
                           static_cast<double>(n_);
    eta_.noalias() = v_ * gamma;
    return outcome + selection_loss_value(eta_) / static_cast<double>(n_ + m_);
}

void JointObjective::gradient(const Vector& alpha, Vector& grad) const {
    grad.resize(dim());
    const auto beta = alpha.head(2 * p_ + 2);
    const auto gamma = alpha.tail(p_ + 1);
    scratch_.noalias() = utu_ * beta;
    grad.head(2 * p_ + 2) = (2.0 / static_cast<double>(n_)) * (scratch_ - uty_);
    eta_.noalias() = v_ * gamma;
    selection_loss_derivative(eta_, dloss_);
    grad.tail(p_ + 1).noalias() =
        v_.transpose() * dloss_ / static_cast<double>(n_ + m_);
}

double JointObjective::outcome_rss(const Vector& beta) const {
    return (y_ - u_ * beta).squaredNorm();
}

Vector JointObjective::initial_point() const {
    Vector alpha = Vector::Zero(dim());

    Matrix base(n_, 2);
    base.col(0).setOnes();
    base.col(1) = u_.col(2 * p_ + 1);  // treatment column
    const LinearFit fit = fit_ols(base, y_);
    alpha(2 * p_) = fit.coefficients(0);
    alpha(2 * p_ + 1) = fit.coefficients(1);

    // Selection intercept alone: 1-D Newton on the weighted loss.
    double c = 0.0;
    for (int it = 0; it < 100; ++it) {
        double d1 = 0.0, d2 = 0.0;
        if (loss_ == SelectionLoss::Bernoulli) {
            const double s = sigmoid(c);
            for (Index i = 0; i < labels_.size(); ++i)
                d1 += row_weight_(i) * (s - labels_(i));
            d2 = row_weight_.sum() * s * (1.0 - s);
        } else {
            for (Index i = 0; i < labels_.size(); ++i) {
                const double sign = 2.0 * labels_(i) - 1.0;
                const double sg = sigmoid(-2.0 * sign * c);
                d1 += row_weight_(i) * (-2.0 * sign * sg);
                d2 += row_weight_(i) * 4.0 * sg * (1.0 - sg);
            }
        }
        if (d2 <= 0.0) break;
        const double delta = d1 / d2;
        c -= delta;
        if (std::abs(delta) < 1e-14) break;
    }
    alpha(3 * p_ + 2) = c;
    return alpha;
}

double JointObjective::smooth_lipschitz_bound() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es_out(utu_, Eigen::EigenvaluesOnly);
    const double l_out =
        2.0 * es_out.eigenvalues().maxCoeff() / static_cast<double>(n_);

    Matrix vwv = v_.transpose() * row_weight_.asDiagonal() * v_;
    Eigen::SelfAdjointEigenSolver<Matrix> es_sel(vwv, Eigen::EigenvaluesOnly);
    const double curvature = loss_ == SelectionLoss::Bernoulli ? 0.25 : 1.0;
    const double l_sel =
        curvature * es_sel.eigenvalues().maxCoeff() / static_cast<double>(n_ + m_);

    // The smooth Hessian is block-diagonal in (beta, gamma).
    return std::max(l_out, l_sel);
}

void group_prox_block(Eigen::Ref<Vector> block, double threshold) {
    if (threshold <= 0.0) return;
    const double norm = block.norm();
    if (norm <= threshold) {
        block.setZero();
    } else {
        block *= 1.0 - threshold / norm;
    }
}

namespace {

struct GroupView {
    // Flattened group layout for fast prox/penalty loops.
    std::vector<int> indices;
    std::vector<int> offsets;  // size n_groups + 1
    int n_groups = 0;

    explicit GroupView(const GroupStructure& gs) {
        n_groups = gs.n_groups();
        offsets.reserve(static_cast<std::size_t>(n_groups) + 1);
        offsets.push_back(0);
        for (const auto& g : gs.groups) {
            indices.insert(indices.end(), g.begin(), g.end());
            offsets.push_back(static_cast<int>(indices.size()));
        }
    }

    template <class F>
    void for_each(int k, F&& f) const {
        for (int i = offsets[static_cast<std::size_t>(k)];
             i < offsets[static_cast<std::size_t>(k) + 1]; ++i)
            f(indices[static_cast<std::size_t>(i)]);
    }

    double block_norm(int k, const Vector& x) const {
        double ss = 0.0;
        for_each(k, [&](int idx) { ss += x(idx) * x(idx); });
        return std::sqrt(ss);
    }
};

double penalty_value(const Vector& alpha, const GroupView& view, const Vector& w,
                     double lambda) {
    double total = 0.0;
    for (int k = 0; k < view.n_groups; ++k) {
        if (w(k) == 0.0) continue;
        total += w(k) * view.block_norm(k, alpha);
    }
    return lambda * total;
}

void apply_prox(Vector& alpha, const GroupView& view, const Vector& w,
                double step_lambda) {
    for (int k = 0; k < view.n_groups; ++k) {
        const double threshold = step_lambda * w(k);
        if (threshold <= 0.0) continue;
        const double norm = view.block_norm(k, alpha);
        if (norm <= threshold) {
            view.for_each(k, [&](int idx) { alpha(idx) = 0.0; });
        } else {
            const double scale = 1.0 - threshold / norm;
            view.for_each(k, [&](int idx) { alpha(idx) *= scale; });
        }
    }
}

double kkt_residual_impl(const Vector& grad, const Vector& alpha, const GroupView& view,
                         const Vector& w, double lambda) {
    double worst = 0.0;
    for (int k = 0; k < view.n_groups; ++k) {
        double r;
        if (w(k) == 0.0) {
            r = view.block_norm(k, grad);
        } else if (view.block_norm(k, alpha) == 0.0) {
            r = std::max(0.0, view.block_norm(k, grad) - lambda * w(k));
        } else {
            const double norm = view.block_norm(k, alpha);
            double ss = 0.0;
            view.for_each(k, [&](int idx) {
                const double ri = grad(idx) + lambda * w(k) * alpha(idx) / norm;
                ss += ri * ri;
            });
            r = std::sqrt(ss);
        }
        worst = std::max(worst, r);
    }
    return worst;
}

// Monotone accelerated proximal-gradient at a single lambda.
// Returns true when both the relative-objective and KKT criteria were met.
bool solve_single(const JointObjective& objective, const GroupView& view,
                  const Vector& w, double lambda, double base_step,
                  const GlavesConfig& cfg, Vector& x,
                  std::vector<double>* trace) {
    const int dim = objective.dim();
    Vector grad(dim), ypt = x, z(dim), x_prev = x, diff(dim);

    double fx = objective.value(x) + penalty_value(x, view, w, lambda);
    if (trace) trace->push_back(fx);

    double step = base_step;
    double t = 1.0;
    int next_kkt_check = 0;

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        objective.gradient(ypt, grad);
        const double smooth_y = objective.value(ypt);

        // Backtracking: halve until the quadratic majorization holds.
        double smooth_z = 0.0;
        for (;;) {
            z = ypt - step * grad;
            apply_prox(z, view, w, step * lambda);
            diff = z - ypt;
            smooth_z = objective.value(z);
            const double bound = smooth_y + grad.dot(diff) +
                                 diff.squaredNorm() / (2.0 * step) +
                                 1e-12 * (1.0 + std::abs(smooth_y));
            if (smooth_z <= bound || step < 1e-18) break;
            step *= 0.5;
        }

        const double fz = smooth_z + penalty_value(z, view, w, lambda);
        const bool accepted = fz <= fx;
        const double f_new = accepted ? fz : fx;

        if (accepted) {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            ypt = z + ((t - 1.0) / t_next) * (z - x_prev);
            t = t_next;
            x_prev = x;
            x = z;
        } else {
            // Momentum overshoot: restart from the best iterate.
            ypt = x;
            x_prev = x;
            t = 1.0;
        }
        if (trace) trace->push_back(f_new);

        if (accepted &&
            std::abs(fx - f_new) <= cfg.objective_rel_tol * std::max(1.0, std::abs(fx)) &&
            iter >= next_kkt_check) {
            objective.gradient(x, grad);
            if (kkt_residual_impl(grad, x, view, w, lambda) <= cfg.kkt_tol) return true;
            next_kkt_check = iter + 10;
        }
        fx = f_new;
    }
    return false;
}

}  // namespace

double kkt_residual(const JointObjective& objective, const GroupStructure& groups,
                    const AdaptiveWeights& weights, double lambda, const Vector& alpha) {
    GroupView view(groups);
    Vector grad;
    objective.gradient(alpha, grad);
    return kkt_residual_impl(grad, alpha, view, weights.w, lambda);
}

double gcv_from_rss(double rss, const Vector& beta, const AdaptiveWeights& weights,
                    Index n) {
    const Index twop = weights.v.size();
    double df = 2.0;
    for (Index k = 0; k < twop; ++k) {
        if (beta(k) != 0.0) df += 1.0;
        df += std::abs(beta(k)) / weights.v(k);
    }
    if (df >= static_cast<double>(n)) return std::numeric_limits<double>::infinity();
    const double denom = 1.0 - df / static_cast<double>(n);
    return rss / (denom * denom);
}

double gcv_value(const Vector& beta, const ExperimentalSample& scaled_exp,
                 const AdaptiveWeights& weights) {
    const Matrix design = outcome_design(scaled_exp);
    const double rss = (scaled_exp.y - design * beta).squaredNorm();
    return gcv_from_rss(rss, beta, weights, scaled_exp.n());
}

GlavesFit solve_path(const JointObjective& objective, const GroupStructure& groups,
                     const AdaptiveWeights& weights, const GlavesConfig& cfg) {
    const int p = groups.p;
    const GroupView view(groups);

    Vector alpha = objective.initial_point();
    Vector grad;
    objective.gradient(alpha, grad);

    double lambda_max = 0.0;
    for (int k = 0; k < groups.n_groups(); ++k) {
        if (weights.w(k) == 0.0) continue;
        lambda_max = std::max(lambda_max, view.block_norm(k, grad) / weights.w(k));
    }
    lambda_max = std::max(lambda_max, 1e-12);

    GlavesFit fit;
    fit.weights = weights;
    if (cfg.explicit_lambdas) {
        const auto& ls = *cfg.explicit_lambdas;
        fit.lambda_grid.resize(static_cast<Index>(ls.size()));
        for (std::size_t i = 0; i < ls.size(); ++i)
            fit.lambda_grid(static_cast<Index>(i)) = ls[i];
    } else {
        const int g = cfg.n_lambdas;
        fit.lambda_grid.resize(g);
        if (g == 1) {
            fit.lambda_grid(0) = lambda_max;
        } else {
            const double log_max = std::log(lambda_max);
            const double log_min = std::log(lambda_max * cfg.lambda_min_ratio);
            for (int i = 0; i < g; ++i) {
                const double f = static_cast<double>(i) / static_cast<double>(g - 1);
                fit.lambda_grid(i) = std::exp(log_max + f * (log_min - log_max));
            }
        }
    }

    const Index n_lambda = fit.lambda_grid.size();
    fit.beta.resize(2 * p + 2, n_lambda);
    fit.gamma.resize(p + 1, n_lambda);
    fit.gcv.resize(n_lambda);
    fit.converged.assign(static_cast<std::size_t>(n_lambda), 0);
    if (cfg.track_objective)
        fit.objective_trace.resize(static_cast<std::size_t>(n_lambda));

    const double base_step = 1.0 / objective.smooth_lipschitz_bound();

    for (Index l = 0; l < n_lambda; ++l) {
        std::vector<double>* trace =
            cfg.track_objective ? &fit.objective_trace[static_cast<std::size_t>(l)]
                                : nullptr;
        const bool ok = solve_single(objective, view, weights.w, fit.lambda_grid(l),
                                     base_step, cfg, alpha, trace);
        fit.converged[static_cast<std::size_t>(l)] = ok ? 1 : 0;
        fit.beta.col(l) = alpha.head(2 * p + 2);
        fit.gamma.col(l) = alpha.tail(p + 1);
        fit.gcv(l) = gcv_from_rss(objective.outcome_rss(fit.beta.col(l)),
                                  fit.beta.col(l), weights, objective.n());
        for (int j = 0; j < p; ++j) {
            const bool beta_zero = fit.beta(p + j, l) == 0.0;
            const bool gamma_zero = fit.gamma(j, l) == 0.0;
            if (beta_zero != gamma_zero) ++fit.coupling_violations;
        }
    }

    fit.chosen_index = 0;
    for (Index l = 1; l < n_lambda; ++l) {
        if (fit.gcv(l) < fit.gcv(fit.chosen_index)) fit.chosen_index = static_cast<int>(l);
    }
    fit.chosen_lambda = fit.lambda_grid(fit.chosen_index);

    for (int j = 0; j < p; ++j) {
        if (fit.beta(p + j, fit.chosen_index) != 0.0) fit.selected_interactions.push_back(j);
        if (fit.beta(j, fit.chosen_index) != 0.0) fit.selected_main_effects.push_back(j);
    }
    return fit;
}

GlavesFit glaves_fit(const ExperimentalSample& exp, const TargetSample& tgt,
                     const GlavesConfig& cfg) {
    validate_pair(exp, tgt);
    const StandardizedData std_data = standardize(exp, tgt, cfg.scaling);
    const std::optional<NormalizedWeights> omega = make_omega(tgt);

    const FullModelCoefficients full = full_outcome_model_coefficients(std_data.exp);
    const AdaptiveWeights aw =
        adaptive_weights(full, static_cast<int>(exp.p()), cfg.v_mode);

    const JointObjective objective(std_data.exp, std_data.tgt, omega, cfg.selection_loss);
    GlavesFit fit =
        solve_path(objective, GroupStructure::make(static_cast<int>(exp.p())), aw, cfg);
    fit.standardization = std_data.info;
    return fit;
}

TateEstimate estimate_tate_glaves(const GlavesFit& fit, const TargetSample& scaled_tgt,
                                  const std::optional<NormalizedWeights>& omega) {
    if (fit.chosen_index < 0) throw std::logic_error("no chosen lambda on the fit");
    const int p = static_cast<int>(scaled_tgt.p());
    const Index m = scaled_tgt.m();
    const Vector beta = fit.beta.col(fit.chosen_index);

    Vector row_weight = omega ? omega->omega : Vector::Ones(m);
    const Vector weighted_col_mean =
        scaled_tgt.x_star.transpose() * row_weight / static_cast<double>(m);

    const double delta_scaled =
        beta(2 * p + 1) + weighted_col_mean.dot(beta.segment(p, p));

    TateEstimate est;
    est.method = "GLAVeS";
    est.point = fit.standardization.sd_y * delta_scaled;
    return est;
}

TateEstimate refit_olsglaves(const ExperimentalSample& exp,
                             const std::vector<int>& selected_main_effects,
                             const std::vector<int>& selected_interactions,
                             const TargetSample& tgt,
                             const std::optional<NormalizedWeights>& omega) {
    const Index n = exp.n();
    const Index m = tgt.m();
    const auto n_main = static_cast<Index>(selected_main_effects.size());
    const auto n_int = static_cast<Index>(selected_interactions.size());

    Matrix design(n, 2 + n_main + n_int);
    design.col(0).setOnes();
    design.col(1) = exp.a;
    for (Index c = 0; c < n_main; ++c)
        design.col(2 + c) = exp.x.col(selected_main_effects[static_cast<std::size_t>(c)]);
    for (Index c = 0; c < n_int; ++c)
        design.col(2 + n_main + c) =
            exp.a.array() *
            exp.x.col(selected_interactions[static_cast<std::size_t>(c)]).array();

    const LinearFit fit = fit_ols(design, exp.y);

    const Vector row_weight = omega ? omega->omega : Vector::Ones(m);
    double estimate = fit.coefficients(1);
    for (Index c = 0; c < n_int; ++c) {
        const double wmean =
            tgt.x_star.col(selected_interactions[static_cast<std::size_t>(c)])
                .dot(row_weight) /
            static_cast<double>(m);
        estimate += fit.coefficients(2 + n_main + c) * wmean;
    }

    TateEstimate est;
    est.method = "OLSGLAVeS";
    est.point = estimate;
    if (fit.rank_deficient) est.note = "rank_deficient";
    return est;
}

std::pair<double, double> bootstrap_ci(const TateEstimator& estimator,
                                       const ExperimentalSample& exp,
                                       const TargetSample& tgt, int n_bootstrap,
                                       std::uint64_t seed) {
    if (n_bootstrap < 2) throw std::invalid_argument("need at least 2 bootstrap replicates");
    const Index n = exp.n();
    const Index m = tgt.m();

    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n_bootstrap));
    int dropped = 0;

    for (int b = 0; b < n_bootstrap; ++b) {
        auto engine = make_engine(seed, {static_cast<std::uint64_t>(b), 0xb007u});
        std::uniform_int_distribution<Index> pick_exp(0, n - 1);
        std::uniform_int_distribution<Index> pick_tgt(0, m - 1);

        ExperimentalSample rexp;
        rexp.y.resize(n);
        rexp.a.resize(n);
        rexp.x.resize(n, exp.p());
        for (Index i = 0; i < n; ++i) {
            const Index r = pick_exp(engine);
            rexp.y(i) = exp.y(r);
            rexp.a(i) = exp.a(r);
            rexp.x.row(i) = exp.x.row(r);
        }

        TargetSample rtgt;
        rtgt.x_star.resize(m, tgt.p());
        if (tgt.raw_weights) rtgt.raw_weights = Vector(m);
        for (Index i = 0; i < m; ++i) {
            const Index r = pick_tgt(engine);
            rtgt.x_star.row(i) = tgt.x_star.row(r);
            if (tgt.raw_weights) (*rtgt.raw_weights)(i) = (*tgt.raw_weights)(r);
        }

        try {
            values.push_back(
                estimator(rexp, rtgt,
                          derive_seed(seed, {static_cast<std::uint64_t>(b), 0xcf0u})));
        } catch (const std::exception&) {
            ++dropped;
        }
    }

    if (dropped * 10 > n_bootstrap) {
        throw std::runtime_error("more than 10% of bootstrap replicates failed (" +
                                 std::to_string(dropped) + "/" +
                                 std::to_string(n_bootstrap) + ")");
    }
    return {quantile(values, 0.025), quantile(values, 0.975)};
}

}  // namespace glaves
