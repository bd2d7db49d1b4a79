#include "glaves/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "glaves/rng.hpp"

namespace glaves {

namespace {

std::vector<Index> arm_rows(const ExperimentalSample& exp, double arm) {
    std::vector<Index> rows;
    for (Index i = 0; i < exp.n(); ++i)
        if (exp.a(i) == arm) rows.push_back(i);
    return rows;
}

Vector weighted_target_col_means(const TargetSample& tgt,
                                 const std::optional<NormalizedWeights>& omega) {
    const Vector row_weight = omega ? omega->omega : Vector::Ones(tgt.m());
    return tgt.x_star.transpose() * row_weight / static_cast<double>(tgt.m());
}

std::vector<int> full_index_set(int p) {
    std::vector<int> all(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;
    return all;
}

// Columns of `design` listed in `penalized` are divided by their sample SD
// before the path fit and the coefficients mapped back, mirroring the usual
// internal standardization of lasso packages.
struct ScaledDesign {
    Matrix design;
    Vector scale;  // 1 for unpenalized columns
};

ScaledDesign scale_penalized_columns(Matrix design, const std::vector<int>& unpenalized) {
    ScaledDesign out;
    out.scale = Vector::Ones(design.cols());
    std::vector<bool> is_unpen(static_cast<std::size_t>(design.cols()), false);
    for (int c : unpenalized) is_unpen[static_cast<std::size_t>(c)] = true;
    for (Index j = 0; j < design.cols(); ++j) {
        if (is_unpen[static_cast<std::size_t>(j)]) continue;
        const double sd = sample_sd(design.col(j));
        if (sd > 0.0) {
            out.scale(j) = sd;
            design.col(j) /= sd;
        }
    }
    out.design = std::move(design);
    return out;
}

Vector lasso_cv_coefficients(const Matrix& design, const Vector& response,
                             const std::vector<int>& unpenalized, const CvConfig& cv,
                             const LassoConfig& lasso) {
    const ScaledDesign scaled = scale_penalized_columns(design, unpenalized);
    LassoPath path = fit_lasso_path(scaled.design, response, unpenalized, lasso);
    select_lambda_cv(scaled.design, response, unpenalized, path, cv, lasso);
    Vector coef = path.coefficients_at_chosen();
    coef.array() /= scaled.scale.array();
    return coef;
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::SDiff: return "S.Diff";
        case Method::Ols: return "OLS";
        case Method::IntLasso: return "IntLASSO";
        case Method::Lasso: return "LASSO";
        case Method::Glaves: return "GLAVeS";
        case Method::OlsGlaves: return "OLSGLAVeS";
    }
    throw std::logic_error("unknown method");
}

Method parse_method(const std::string& name) {
    std::string key;
    for (char c : name)
        if (c != '.' && c != '-' && c != '_')
            key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (key == "sdiff") return Method::SDiff;
    if (key == "ols") return Method::Ols;
    if (key == "intlasso") return Method::IntLasso;
    if (key == "lasso") return Method::Lasso;
    if (key == "glaves") return Method::Glaves;
    if (key == "olsglaves") return Method::OlsGlaves;
    throw std::invalid_argument("unknown method '" + name + "'");
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods = {Method::SDiff,  Method::Ols,
                                                Method::IntLasso, Method::Lasso,
                                                Method::Glaves, Method::OlsGlaves};
    return methods;
}

EstimatorResult s_diff(const ExperimentalSample& exp) {
    const auto treated = arm_rows(exp, 1.0);
    const auto control = arm_rows(exp, 0.0);
    if (treated.empty() || control.empty()) throw std::invalid_argument("empty treatment arm");

    double mean1 = 0.0, mean0 = 0.0;
    for (Index i : treated) mean1 += exp.y(i);
    for (Index i : control) mean0 += exp.y(i);
    mean1 /= static_cast<double>(treated.size());
    mean0 /= static_cast<double>(control.size());

    EstimatorResult res;
    res.estimate.method = method_name(Method::SDiff);
    res.estimate.point = mean1 - mean0;
    return res;
}

EstimatorResult ols_tate(const ExperimentalSample& exp, const TargetSample& tgt,
                         const std::optional<NormalizedWeights>& omega) {
    const int p = static_cast<int>(exp.p());
    const auto treated = arm_rows(exp, 1.0);
    const auto control = arm_rows(exp, 0.0);
    if (static_cast<Index>(treated.size()) <= p + 1 ||
        static_cast<Index>(control.size()) <= p + 1)
        throw std::invalid_argument("treatment arm too small for arm-specific OLS");

    auto fit_arm = [&](const std::vector<Index>& rows) {
        Matrix design(static_cast<Index>(rows.size()), p + 1);
        Vector y(static_cast<Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            design(static_cast<Index>(i), 0) = 1.0;
            design.row(static_cast<Index>(i)).tail(p) = exp.x.row(rows[i]);
            y(static_cast<Index>(i)) = exp.y(rows[i]);
        }
        return fit_ols(design, y);
    };
    const LinearFit fit1 = fit_arm(treated);
    const LinearFit fit0 = fit_arm(control);
    const Vector diff = fit1.coefficients - fit0.coefficients;

    const Vector col_means = weighted_target_col_means(tgt, omega);
    EstimatorResult res;
    res.estimate.method = method_name(Method::Ols);
    res.estimate.point = diff(0) + col_means.dot(diff.tail(p));
    if (fit1.rank_deficient || fit0.rank_deficient) res.estimate.note = "rank_deficient";
    res.selected_interactions = full_index_set(p);
    res.selected_main_effects = full_index_set(p);
    return res;
}

EstimatorResult int_lasso_tate(const ExperimentalSample& exp, const TargetSample& tgt,
                               const std::optional<NormalizedWeights>& omega,
                               const CvConfig& cv, const LassoConfig& lasso) {
    const int p = static_cast<int>(exp.p());
    const Index n = exp.n();

    // Columns: 1, A, X_1..X_p, A*X_1..A*X_p.
    Matrix design(n, 2 + 2 * p);
    design.col(0).setOnes();
    design.col(1) = exp.a;
    design.middleCols(2, p) = exp.x;
    for (int j = 0; j < p; ++j)
        design.col(2 + p + j) = exp.a.array() * exp.x.col(j).array();

    const Vector coef = lasso_cv_coefficients(design, exp.y, {0, 1}, cv, lasso);
    const Vector col_means = weighted_target_col_means(tgt, omega);

    EstimatorResult res;
    res.estimate.method = method_name(Method::IntLasso);
    res.estimate.point = coef(1) + col_means.dot(coef.segment(2 + p, p));
    for (int j = 0; j < p; ++j) {
        if (coef(2 + p + j) != 0.0) res.selected_interactions.push_back(j);
        if (coef(2 + j) != 0.0) res.selected_main_effects.push_back(j);
    }
    return res;
}

EstimatorResult twoarm_lasso_tate(const ExperimentalSample& exp, const TargetSample& tgt,
                                  const std::optional<NormalizedWeights>& omega,
                                  const CvConfig& cv, const LassoConfig& lasso) {
    const int p = static_cast<int>(exp.p());
    const auto treated = arm_rows(exp, 1.0);
    const auto control = arm_rows(exp, 0.0);
    if (treated.size() < 2 || control.size() < 2)
        throw std::invalid_argument("treatment arm too small for arm-specific lasso");

    auto fit_arm = [&](const std::vector<Index>& rows, std::uint64_t salt) {
        Matrix design(static_cast<Index>(rows.size()), p + 1);
        Vector y(static_cast<Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            design(static_cast<Index>(i), 0) = 1.0;
            design.row(static_cast<Index>(i)).tail(p) = exp.x.row(rows[i]);
            y(static_cast<Index>(i)) = exp.y(rows[i]);
        }
        CvConfig arm_cv = cv;
        arm_cv.seed = derive_seed(cv.seed, {salt});
        return lasso_cv_coefficients(design, y, {0}, arm_cv, lasso);
    };
    const Vector coef1 = fit_arm(treated, 1);
    const Vector coef0 = fit_arm(control, 0);
    const Vector diff = coef1 - coef0;

    const Vector col_means = weighted_target_col_means(tgt, omega);
    EstimatorResult res;
    res.estimate.method = method_name(Method::Lasso);
    res.estimate.point = diff(0) + col_means.dot(diff.tail(p));
    for (int j = 0; j < p; ++j) {
        if (coef1(1 + j) != 0.0 || coef0(1 + j) != 0.0) {
            res.selected_interactions.push_back(j);
            res.selected_main_effects.push_back(j);
        }
    }
    return res;
}

EstimatorResult glaves_estimate(const ExperimentalSample& exp, const TargetSample& tgt,
                                const GlavesConfig& cfg) {
    const GlavesFit fit = glaves_fit(exp, tgt, cfg);
    const StandardizedData std_data = standardize(exp, tgt, cfg.scaling);
    EstimatorResult res;
    res.estimate = estimate_tate_glaves(fit, std_data.tgt, make_omega(tgt));
    res.selected_interactions = fit.selected_interactions;
    res.selected_main_effects = fit.selected_main_effects;
    return res;
}

EstimatorResult olsglaves_estimate(const ExperimentalSample& exp, const TargetSample& tgt,
                                   const GlavesConfig& cfg) {
    const GlavesFit fit = glaves_fit(exp, tgt, cfg);
    EstimatorResult res;
    res.estimate = refit_olsglaves(exp, fit.selected_main_effects,
                                   fit.selected_interactions, tgt, make_omega(tgt));
    res.selected_interactions = fit.selected_interactions;
    res.selected_main_effects = fit.selected_main_effects;
    return res;
}

std::vector<EstimatorResult> run_methods(const std::vector<Method>& methods,
                                         const ExperimentalSample& exp,
                                         const TargetSample& tgt,
                                         const EstimatorConfig& cfg) {
    const std::optional<NormalizedWeights> omega = make_omega(tgt);

    // GLAVeS and OLSGLAVeS share the penalized fit (and thus selection sets).
    std::optional<GlavesFit> shared_fit;
    auto glaves_shared = [&]() -> const GlavesFit& {
        if (!shared_fit) shared_fit = glaves_fit(exp, tgt, cfg.glaves);
        return *shared_fit;
    };

    std::vector<EstimatorResult> out;
    out.reserve(methods.size());
    for (Method method : methods) {
        switch (method) {
            case Method::SDiff:
                out.push_back(s_diff(exp));
                break;
            case Method::Ols:
                out.push_back(ols_tate(exp, tgt, omega));
                break;
            case Method::IntLasso: {
                CvConfig cv = cfg.cv;
                cv.seed = derive_seed(cfg.cv.seed, {0x10u});
                out.push_back(int_lasso_tate(exp, tgt, omega, cv, cfg.lasso));
                break;
            }
            case Method::Lasso: {
                CvConfig cv = cfg.cv;
                cv.seed = derive_seed(cfg.cv.seed, {0x20u});
                out.push_back(twoarm_lasso_tate(exp, tgt, omega, cv, cfg.lasso));
                break;
            }
            case Method::Glaves: {
                const GlavesFit& fit = glaves_shared();
                const StandardizedData std_data = standardize(exp, tgt, cfg.glaves.scaling);
                EstimatorResult res;
                res.estimate = estimate_tate_glaves(fit, std_data.tgt, omega);
                res.selected_interactions = fit.selected_interactions;
                res.selected_main_effects = fit.selected_main_effects;
                out.push_back(std::move(res));
                break;
            }
            case Method::OlsGlaves: {
                const GlavesFit& fit = glaves_shared();
                EstimatorResult res;
                res.estimate = refit_olsglaves(exp, fit.selected_main_effects,
                                               fit.selected_interactions, tgt, omega);
                res.selected_interactions = fit.selected_interactions;
                res.selected_main_effects = fit.selected_main_effects;
                out.push_back(std::move(res));
                break;
            }
        }
    }
    return out;
}

EstimatorResult run_method(Method method, const ExperimentalSample& exp,
                           const TargetSample& tgt, const EstimatorConfig& cfg) {
    return run_methods({method}, exp, tgt, cfg).front();
}

}  // namespace glaves
