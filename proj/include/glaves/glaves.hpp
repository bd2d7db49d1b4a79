#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "glaves/data.hpp"
#include "glaves/regression.hpp"

namespace glaves {

// Stacked coefficient layout over alpha = (beta, gamma):
//   beta[0..p-1]     outcome main effects
//   beta[p..2p-1]    outcome treatment interactions
//   beta[2p]         outcome intercept
//   beta[2p+1]       treatment coefficient
//   gamma[0..p-1]    selection coefficients       (stacked at 2p+2 ..)
//   gamma[p]         selection intercept          (stacked at 3p+2)
// Groups: p main-effect singletons, p {interaction, selection} pairs,
// the pair of intercepts, and the treatment coefficient alone.
struct GroupStructure {
    int p = 0;
    std::vector<std::vector<int>> groups;

    static GroupStructure make(int p);

    int n_groups() const { return 2 * p + 2; }
    int dim() const { return 3 * p + 3; }

    int beta_main(int j) const { return j; }
    int beta_interaction(int j) const { return p + j; }
    int beta_intercept() const { return 2 * p; }
    int beta_treatment() const { return 2 * p + 1; }
    int gamma(int j) const { return 2 * p + 2 + j; }
    int gamma_intercept() const { return 3 * p + 2; }
};

// Which full-model coefficient divides each group's penalty weight.
//   Grouped: each group uses its own outcome coefficient (main effect for
//            main-effect groups, interaction for pair groups).
//   LiteralInteraction: every penalized group uses the interaction
//            coefficient of its covariate.
enum class VMode { Grouped, LiteralInteraction };

struct AdaptiveWeights {
    Vector w;  // length 2p+2; zero for the intercept and treatment groups
    Vector v;  // length 2p; floored |full-model coefficient| per penalized group
};

AdaptiveWeights adaptive_weights(const FullModelCoefficients& full_model, int p,
                                 VMode mode = VMode::Grouped);

// Selection-loss variants. Bernoulli is the standard negative log-likelihood
// under the logit link; PlusMinusTwo is the +-1-label exponential-family form
// log(1 + exp(-2*(2S-1)*h)), kept for sensitivity checks.
enum class SelectionLoss { Bernoulli, PlusMinusTwo };

// Smooth part of the joint criterion:
//   (1/n) * sum of squared outcome errors over experimental rows
// + (1/(n+m)) * [ sum of experimental selection losses
//               + sum of (omega-weighted) target selection losses ].
// Instances hold scratch buffers; use one instance per fit.
class JointObjective {
  public:
    JointObjective(const ExperimentalSample& scaled_exp, const TargetSample& scaled_tgt,
                   const std::optional<NormalizedWeights>& omega,
                   SelectionLoss loss = SelectionLoss::Bernoulli);

    int p() const { return p_; }
    Index n() const { return n_; }
    Index m() const { return m_; }
    int dim() const { return 3 * p_ + 3; }

    double value(const Vector& alpha) const;
    void gradient(const Vector& alpha, Vector& grad) const;

    // Outcome-model residual sum of squares over the experimental rows.
    double outcome_rss(const Vector& beta) const;

    // Penalized groups at zero, unpenalized coordinates fit alone.
    Vector initial_point() const;

    // Upper bound on the Lipschitz constant of the gradient.
    double smooth_lipschitz_bound() const;

  private:
    double selection_loss_value(const Vector& eta) const;
    void selection_loss_derivative(const Vector& eta, Vector& out) const;

    int p_;
    Index n_, m_;
    SelectionLoss loss_;
    Matrix utu_;        // outcome design Gram (2p+2)^2
    Vector uty_;
    double yty_;
    Matrix u_;          // outcome design, n x (2p+2)
    Vector y_;
    Matrix v_;          // selection design, (n+m) x (p+1)
    Vector labels_;     // 1 experimental, 0 target
    Vector row_weight_; // 1 experimental, omega target
    mutable Vector eta_, dloss_, scratch_;
};

struct GlavesConfig {
    int n_lambdas = 100;
    double lambda_min_ratio = 1e-3;
    double objective_rel_tol = 1e-8;
    double kkt_tol = 1e-6;
    int max_iterations = 5000;
    VMode v_mode = VMode::Grouped;
    SelectionLoss selection_loss = SelectionLoss::Bernoulli;
    ScalingPolicy scaling = ScalingPolicy::ExperimentalSd;
    // Testing hook: solve exactly these lambda values instead of the grid.
    std::optional<std::vector<double>> explicit_lambdas;
    bool track_objective = false;
};

struct GlavesFit {
    Vector lambda_grid;  // decreasing
    Matrix beta;         // (2p+2) x n_lambdas
    Matrix gamma;        // (p+1) x n_lambdas
    Vector gcv;
    int chosen_index = -1;
    double chosen_lambda = 0.0;
    std::vector<int> selected_interactions;  // 0-based covariate indices
    std::vector<int> selected_main_effects;
    StandardizationInfo standardization;
    AdaptiveWeights weights;
    std::vector<char> converged;  // per lambda
    long coupling_violations = 0;
    // Objective value after each accepted iteration, per lambda
    // (only when track_objective is set).
    std::vector<std::vector<double>> objective_trace;
};

// Blockwise shrinkage: z * max(0, 1 - threshold/||z||), exact zero when
// ||z|| <= threshold.
void group_prox_block(Eigen::Ref<Vector> block, double threshold);

// Proximal-gradient solve of the penalized criterion over a warm-started,
// log-spaced lambda path. lambda_max is the smallest lambda at which every
// penalized group is zero.
GlavesFit solve_path(const JointObjective& objective, const GroupStructure& groups,
                     const AdaptiveWeights& weights, const GlavesConfig& cfg);

// Max group-subgradient violation of the penalized criterion at alpha.
double kkt_residual(const JointObjective& objective, const GroupStructure& groups,
                    const AdaptiveWeights& weights, double lambda, const Vector& alpha);

// RSS / (1 - df/n)^2 on the scaled experimental sample, with
// df = 2 + #nonzero penalized outcome coefficients + sum |beta_k| / v_k.
// +infinity when df >= n.
double gcv_value(const Vector& beta, const ExperimentalSample& scaled_exp,
                 const AdaptiveWeights& weights);
double gcv_from_rss(double rss, const Vector& beta, const AdaptiveWeights& weights,
                    Index n);

struct TateEstimate {
    double point = 0.0;
    std::string method;
    std::optional<std::pair<double, double>> ci;
    int n_bootstrap = 0;
    std::string note;
};

// Full pipeline: validate, standardize, adaptive weights from the full
// outcome model, joint solve, GCV selection.
GlavesFit glaves_fit(const ExperimentalSample& exp, const TargetSample& tgt,
                     const GlavesConfig& cfg = {});

// Plug-in estimate in original outcome units: sd_y * (treatment coefficient
// + (omega-weighted) target mean of the selected interaction terms).
TateEstimate estimate_tate_glaves(const GlavesFit& fit, const TargetSample& scaled_tgt,
                                  const std::optional<NormalizedWeights>& omega);

// OLS refit of {1, A, selected mains, selected A*X} on original units,
// followed by the plug-in average of predicted treated-minus-control
// differences over the (weighted) target rows.
TateEstimate refit_olsglaves(const ExperimentalSample& exp,
                             const std::vector<int>& selected_main_effects,
                             const std::vector<int>& selected_interactions,
                             const TargetSample& tgt,
                             const std::optional<NormalizedWeights>& omega);

// Point estimator recomputed per bootstrap replicate; the seed parameter
// feeds any internal randomness (e.g. CV folds).
using TateEstimator = std::function<double(const ExperimentalSample&, const TargetSample&,
                                           std::uint64_t seed)>;

// Percentile 2.5/97.5 interval from B independent resamples of the
// experimental rows and (weight-carrying) target rows. Failed replicates are
// dropped; more than 10% dropped is an error.
std::pair<double, double> bootstrap_ci(const TateEstimator& estimator,
                                       const ExperimentalSample& exp,
                                       const TargetSample& tgt, int n_bootstrap,
                                       std::uint64_t seed);

}  // namespace glaves
