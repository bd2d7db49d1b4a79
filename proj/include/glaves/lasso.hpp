#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "glaves/data.hpp"

namespace glaves {

struct LassoConfig {
    int n_lambdas = 100;
    double lambda_min_ratio = 1e-3;
    double coef_tol = 1e-7;
    int max_sweeps = 100000;
    // Testing hook: solve exactly these lambda values instead of the grid.
    std::optional<std::vector<double>> explicit_lambdas;
};

enum class FoldAssignment { SeededPermutation, RowHash };

struct CvConfig {
    int k_folds = 10;
    std::uint64_t seed = 0;
    FoldAssignment assignment = FoldAssignment::SeededPermutation;
    // Testing hook: explicit fold id per row, overrides assignment.
    std::optional<std::vector<int>> fold_ids;
};

// Objective: (1/2n) * ||y - X b||^2 + lambda * sum_{j penalized} |b_j|.
struct LassoPath {
    Vector lambdas;       // decreasing
    Matrix coefficients;  // one column per lambda
    Vector cv_mean;       // filled by select_lambda_cv
    Vector cv_se;
    int chosen_index = -1;
    double chosen_lambda = 0.0;

    Vector coefficients_at_chosen() const { return coefficients.col(chosen_index); }
};

// Cyclic coordinate descent over a warm-started lambda path. lambda_max is
// the smallest lambda zeroing all penalized coefficients, computed from the
// residual after fitting the unpenalized columns alone.
LassoPath fit_lasso_path(const Matrix& design, const Vector& response,
                         const std::vector<int>& unpenalized_columns,
                         const LassoConfig& cfg = {});

// K-fold cross-validation over the path's lambda grid; fills cv_mean/cv_se
// and sets chosen_lambda to the mean-CV-error minimizer (largest lambda on
// ties). Fold assignment is a seeded permutation unless overridden.
void select_lambda_cv(const Matrix& design, const Vector& response,
                      const std::vector<int>& unpenalized_columns, LassoPath& path,
                      const CvConfig& cv, const LassoConfig& cfg = {});

// Fold id per row under the given rule; exposed for tests.
std::vector<int> assign_folds(const Matrix& design, const Vector& response,
                              const CvConfig& cv);

}  // namespace glaves
