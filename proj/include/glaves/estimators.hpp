#pragma once

#include <string>
#include <vector>

#include "glaves/glaves.hpp"
#include "glaves/lasso.hpp"

namespace glaves {

enum class Method { SDiff, Ols, IntLasso, Lasso, Glaves, OlsGlaves };

std::string method_name(Method m);
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();

struct EstimatorResult {
    TateEstimate estimate;
    std::vector<int> selected_interactions;  // 0-based covariate indices
    std::vector<int> selected_main_effects;
};

struct EstimatorConfig {
    CvConfig cv;
    LassoConfig lasso;
    GlavesConfig glaves;
};

// Difference of arm mean outcomes; ignores the target sample entirely.
EstimatorResult s_diff(const ExperimentalSample& exp);

// Arm-specific OLS with all covariates, plug-in average of predicted
// treated-minus-control differences over the (weighted) target rows.
EstimatorResult ols_tate(const ExperimentalSample& exp, const TargetSample& tgt,
                         const std::optional<NormalizedWeights>& omega);

// Single lasso on {1, A, X, A*X} with intercept and A unpenalized, lambda by
// cross-validation; penalized columns are standardized internally.
EstimatorResult int_lasso_tate(const ExperimentalSample& exp, const TargetSample& tgt,
                               const std::optional<NormalizedWeights>& omega,
                               const CvConfig& cv, const LassoConfig& lasso = {});

// Arm-specific lasso fits with unpenalized intercepts, lambda by CV per arm.
// A covariate counts as a selected interaction when nonzero in either arm.
EstimatorResult twoarm_lasso_tate(const ExperimentalSample& exp, const TargetSample& tgt,
                                  const std::optional<NormalizedWeights>& omega,
                                  const CvConfig& cv, const LassoConfig& lasso = {});

EstimatorResult glaves_estimate(const ExperimentalSample& exp, const TargetSample& tgt,
                                const GlavesConfig& cfg = {});
EstimatorResult olsglaves_estimate(const ExperimentalSample& exp, const TargetSample& tgt,
                                   const GlavesConfig& cfg = {});

// Dispatch on method; GLAVeS and OLSGLAVeS requested together share one fit.
std::vector<EstimatorResult> run_methods(const std::vector<Method>& methods,
                                         const ExperimentalSample& exp,
                                         const TargetSample& tgt,
                                         const EstimatorConfig& cfg);

EstimatorResult run_method(Method method, const ExperimentalSample& exp,
                           const TargetSample& tgt, const EstimatorConfig& cfg);

}  // namespace glaves
