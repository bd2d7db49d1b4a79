#pragma once

#include <vector>

#include "glaves/data.hpp"

namespace glaves {

struct LinearFit {
    Vector coefficients;
    double residual_sum_squares = 0.0;
    bool rank_deficient = false;
};

struct LogisticFit {
    Vector coefficients;
    bool converged = false;
    double final_negative_log_likelihood = 0.0;
};

// Weighted least squares via column-pivoted QR. On rank deficiency the
// normal equations are solved with a 1e-8 ridge jitter on the diagonal and
// the fit is flagged. residual_sum_squares is weighted when weights are given.
LinearFit fit_ols(const Matrix& design, const Vector& response,
                  const Vector* observation_weights = nullptr);

// Newton iterations on the (weighted) Bernoulli negative log-likelihood with
// step halving, to gradient norm < grad_tol or max_iterations. Under perfect
// separation the coefficient norm is capped and the fit flagged non-converged.
// nll_trace, when given, records the objective after every accepted step.
LogisticFit fit_logistic(const Matrix& design, const Vector& labels,
                         const Vector* observation_weights = nullptr,
                         int max_iterations = 200, double grad_tol = 1e-6,
                         double coef_norm_cap = 30.0,
                         std::vector<double>* nll_trace = nullptr);

struct FullModelCoefficients {
    // Layout: [p main effects, p treatment interactions, intercept, treatment].
    Vector v;
    bool rank_deficient = false;
};

// One OLS fit of y on {X, A*X, 1, A} on the scaled experimental sample.
// Coefficient magnitudes below 1e-8 are floored at 1e-8 (sign preserved)
// so penalty weights derived from them stay finite.
FullModelCoefficients full_outcome_model_coefficients(const ExperimentalSample& scaled_exp);

// Design {X, A*X, 1, A} in the column order used throughout.
Matrix outcome_design(const ExperimentalSample& exp);

inline constexpr double kCoefficientFloor = 1e-8;

}  // namespace glaves
