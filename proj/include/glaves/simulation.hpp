#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "glaves/estimators.hpp"

namespace glaves {

struct ScenarioSpec {
    int id = 0;  // 1..8 built-in, 0 custom
    int p = 0;
    int n = 600;
    int m = 300;
    std::vector<int> interaction_covariates;  // 0-based
    double interaction_coefficient = 0.1;
    std::vector<int> main_effect_covariates;
    std::vector<std::vector<int>> correlated_blocks;
    double block_correlation = 0.6;
    std::vector<int> shifted_covariates;  // N(1,1) in the target set
    double noise_sd = 1.0;
    // When false the target covariates are generated independent
    // (shift kept, block correlation dropped).
    bool target_correlated = true;

    static ScenarioSpec builtin(int id);
    void validate() const;
};

// Analytic expectation of the target average effect:
// 1 + sum over interaction covariates of coefficient * (1 if shifted else 0).
double true_tate(const ScenarioSpec& spec);

// Experimental X ~ MVN(0, Sigma) with compound-symmetric blocks,
// A ~ Bernoulli(0.5), Y ~ N(A + g(X, A), noise_sd); target X* shares the
// block structure with shifted columns centered at 1.
std::pair<ExperimentalSample, TargetSample> generate_replicate(const ScenarioSpec& spec,
                                                               std::uint64_t seed);

struct MethodSummary {
    Method method = Method::SDiff;
    double bias = 0.0;
    double mse = 0.0;
    double sd = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double mc_se_bias = 0.0;
    double mc_se_mse = 0.0;
    double mc_se_sensitivity = 0.0;
    double mc_se_specificity = 0.0;
    int n_used = 0;
    int n_failed = 0;
    bool sensitivity_defined = true;
    bool specificity_defined = true;
};

struct ScenarioSummary {
    int scenario_id = 0;
    double truth = 0.0;
    int replicates = 0;
    std::vector<MethodSummary> methods;
    long glaves_coupling_violations = 0;
};

// Monte Carlo over R replicates with per-replicate derived seeds; results are
// bitwise independent of the worker count. A method failing on more than 1%
// of replicates is an error; rarer failures are dropped and counted.
ScenarioSummary run_scenario(const ScenarioSpec& spec, const std::vector<Method>& methods,
                             int replicates, std::uint64_t base_seed, int workers = 1,
                             const EstimatorConfig& cfg = {});

// Three nested outcome models evaluated against six generative settings
// (same/shifted target covariate distribution x three outcome forms).
struct MotivatingCell {
    double mse = 0.0;
    double mc_se = 0.0;
};

struct MotivatingStudyResult {
    // [distribution 0=same,1=different][data model 0..2][fitted model 0..2]
    std::array<std::array<std::array<MotivatingCell, 3>, 3>, 2> cells{};
    std::array<std::array<double, 3>, 2> truth{};
    int replicates = 0;

    static const char* distribution_label(int d);
    static const char* model_label(int g);
};

MotivatingStudyResult run_motivating_study(int replicates, std::uint64_t seed,
                                           double noise_sd = 1.5, int workers = 1);

}  // namespace glaves
