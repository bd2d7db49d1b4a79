#pragma once

#include <Eigen/Dense>
#include <optional>

namespace glaves {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Trial data: continuous outcome, 0/1 treatment, covariate matrix.
// Values are kept in original units; standardize() produces scaled copies.
struct ExperimentalSample {
    Vector y;
    Vector a;
    Matrix x;

    Index n() const { return y.size(); }
    Index p() const { return x.cols(); }
};

// Covariate-only sample from the target population, with optional raw
// survey weights (strictly positive when present).
struct TargetSample {
    Matrix x_star;
    std::optional<Vector> raw_weights;

    Index m() const { return x_star.rows(); }
    Index p() const { return x_star.cols(); }
};

enum class ScalingPolicy { ExperimentalSd, PooledSd };

// Scaling constants so estimates can be mapped back to original units.
struct StandardizationInfo {
    double sd_y = 1.0;
    Vector sd_x;
    ScalingPolicy policy = ScalingPolicy::ExperimentalSd;
};

// Survey weights rescaled to mean exactly 1.
struct NormalizedWeights {
    Vector omega;
};

struct StandardizedData {
    ExperimentalSample exp;
    TargetSample tgt;
    StandardizationInfo info;
};

// Sample standard deviation, n-1 denominator.
double sample_sd(const Vector& v);

// Checks all container invariants: matching column counts, finite entries,
// n >= 2 with both arms non-empty, strictly positive weights, and no
// constant experimental covariate column. Throws std::invalid_argument.
void validate_pair(const ExperimentalSample& exp, const TargetSample& tgt);

// Divides y by sd(y) and every covariate column of both samples by the
// per-column SD dictated by the policy. Covariates are scaled, not centered.
StandardizedData standardize(const ExperimentalSample& exp, const TargetSample& tgt,
                             ScalingPolicy policy = ScalingPolicy::ExperimentalSd);

ExperimentalSample unstandardize(const ExperimentalSample& scaled,
                                 const StandardizationInfo& info);
TargetSample unstandardize(const TargetSample& scaled, const StandardizationInfo& info);

// r -> m * r / sum(r); mean 1, proportions preserved.
NormalizedWeights normalize_weights(const Vector& raw_weights);

// Mean-1 weights from the target sample, or nullopt when unweighted.
std::optional<NormalizedWeights> make_omega(const TargetSample& tgt);

}  // namespace glaves
