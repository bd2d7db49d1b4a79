#include "glaves/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "glaves/regression.hpp"
#include "glaves/rng.hpp"

namespace glaves {

namespace {

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

Vector make_lambda_grid(double lambda_max, const LassoConfig& cfg) {
    if (cfg.explicit_lambdas) {
        const auto& ls = *cfg.explicit_lambdas;
        Vector grid(static_cast<Index>(ls.size()));
        for (std::size_t i = 0; i < ls.size(); ++i) grid(static_cast<Index>(i)) = ls[i];
        return grid;
    }
    const int g = cfg.n_lambdas;
    if (g < 1) throw std::invalid_argument("n_lambdas must be >= 1");
    Vector grid(g);
    if (g == 1) {
        grid(0) = lambda_max;
        return grid;
    }
    const double log_max = std::log(lambda_max);
    const double log_min = std::log(lambda_max * cfg.lambda_min_ratio);
    for (int i = 0; i < g; ++i) {
        const double f = static_cast<double>(i) / static_cast<double>(g - 1);
        grid(i) = std::exp(log_max + f * (log_min - log_max));
    }
    return grid;
}

// Cyclic coordinate descent at a single lambda, warm-started from b.
void descend(const Matrix& x, const Vector& y, const std::vector<bool>& penalized,
             const Vector& col_sq_norm_over_n, double lambda, double tol,
             int max_sweeps, Vector& b, Vector& resid) {
    const Index k = x.cols();
    const double n = static_cast<double>(x.rows());
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Index j = 0; j < k; ++j) {
            const double denom = col_sq_norm_over_n(j);
            if (denom == 0.0) continue;
            const double rho = x.col(j).dot(resid) / n + denom * b(j);
            const double updated =
                penalized[static_cast<std::size_t>(j)]
                    ? soft_threshold(rho, lambda) / denom
                    : rho / denom;
            const double change = updated - b(j);
            if (change != 0.0) {
                resid -= change * x.col(j);
                b(j) = updated;
                max_change = std::max(max_change, std::abs(change));
            }
        }
        if (max_change < tol) return;
    }
}

double compute_lambda_max(const Matrix& x, const Vector& y,
                          const std::vector<int>& unpenalized_columns,
                          const std::vector<bool>& penalized) {
    Vector resid = y;
    if (!unpenalized_columns.empty()) {
        Matrix base(x.rows(), static_cast<Index>(unpenalized_columns.size()));
        for (std::size_t c = 0; c < unpenalized_columns.size(); ++c)
            base.col(static_cast<Index>(c)) = x.col(unpenalized_columns[c]);
        const LinearFit fit = fit_ols(base, y);
        resid -= base * fit.coefficients;
    }
    const double n = static_cast<double>(x.rows());
    double lambda_max = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
        if (!penalized[static_cast<std::size_t>(j)]) continue;
        lambda_max = std::max(lambda_max, std::abs(x.col(j).dot(resid)) / n);
    }
    return std::max(lambda_max, 1e-12);
}

}  // namespace

LassoPath fit_lasso_path(const Matrix& design, const Vector& response,
                         const std::vector<int>& unpenalized_columns,
                         const LassoConfig& cfg) {
    if (!design.allFinite() || !response.allFinite())
        throw std::invalid_argument("non-finite inputs");
    if (design.rows() != response.size())
        throw std::invalid_argument("design/response row mismatch");

    const Index k = design.cols();
    std::vector<bool> penalized(static_cast<std::size_t>(k), true);
    for (int c : unpenalized_columns) {
        if (c < 0 || c >= k) throw std::invalid_argument("unpenalized column out of range");
        penalized[static_cast<std::size_t>(c)] = false;
    }

    const double n = static_cast<double>(design.rows());
    Vector col_sq_norm_over_n(k);
    for (Index j = 0; j < k; ++j)
        col_sq_norm_over_n(j) = design.col(j).squaredNorm() / n;

    LassoPath path;
    path.lambdas =
        make_lambda_grid(compute_lambda_max(design, response, unpenalized_columns, penalized), cfg);
    path.coefficients.setZero(k, path.lambdas.size());

    Vector b = Vector::Zero(k);
    Vector resid = response;
    for (Index l = 0; l < path.lambdas.size(); ++l) {
        descend(design, response, penalized, col_sq_norm_over_n, path.lambdas(l),
                cfg.coef_tol, cfg.max_sweeps, b, resid);
        path.coefficients.col(l) = b;
    }
    return path;
}

std::vector<int> assign_folds(const Matrix& design, const Vector& response,
                              const CvConfig& cv) {
    const Index n = design.rows();
    if (cv.fold_ids) {
        if (static_cast<Index>(cv.fold_ids->size()) != n)
            throw std::invalid_argument("fold id vector length mismatch");
        return *cv.fold_ids;
    }
    if (cv.k_folds < 2) throw std::invalid_argument("k_folds must be >= 2");
    if (n < cv.k_folds) throw std::invalid_argument("fewer rows than folds");

    std::vector<int> folds(static_cast<std::size_t>(n));
    if (cv.assignment == FoldAssignment::SeededPermutation) {
        std::vector<Index> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), Index{0});
        auto engine = make_engine(cv.seed, {0x75f0u});
        std::shuffle(perm.begin(), perm.end(), engine);
        for (Index i = 0; i < n; ++i)
            folds[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
                static_cast<int>(i % cv.k_folds);
    } else {
        // Fold membership depends only on row content, not row position.
        for (Index i = 0; i < n; ++i) {
            std::uint64_t h = splitmix64(cv.seed ^ 0x9a0bu);
            auto mix = [&h](double value) {
                std::uint64_t bits;
                std::memcpy(&bits, &value, sizeof(bits));
                h = splitmix64(h ^ bits);
            };
            mix(response(i));
            for (Index j = 0; j < design.cols(); ++j) mix(design(i, j));
            folds[static_cast<std::size_t>(i)] = static_cast<int>(h % cv.k_folds);
        }
    }
    return folds;
}

void select_lambda_cv(const Matrix& design, const Vector& response,
                      const std::vector<int>& unpenalized_columns, LassoPath& path,
                      const CvConfig& cv, const LassoConfig& cfg) {
    const Index n = design.rows();
    const Index n_lambda = path.lambdas.size();
    const std::vector<int> folds = assign_folds(design, response, cv);
    const int k_folds = *std::max_element(folds.begin(), folds.end()) + 1;

    Matrix fold_mse = Matrix::Zero(n_lambda, k_folds);
    LassoConfig sub_cfg = cfg;
    sub_cfg.explicit_lambdas =
        std::vector<double>(path.lambdas.data(), path.lambdas.data() + n_lambda);

    for (int f = 0; f < k_folds; ++f) {
        std::vector<Index> train, held;
        for (Index i = 0; i < n; ++i) {
            (folds[static_cast<std::size_t>(i)] == f ? held : train).push_back(i);
        }
        if (held.empty()) continue;
        if (train.empty()) throw std::invalid_argument("empty training fold");

        Matrix x_train(static_cast<Index>(train.size()), design.cols());
        Vector y_train(static_cast<Index>(train.size()));
        for (std::size_t i = 0; i < train.size(); ++i) {
            x_train.row(static_cast<Index>(i)) = design.row(train[i]);
            y_train(static_cast<Index>(i)) = response(train[i]);
        }
        const LassoPath sub = fit_lasso_path(x_train, y_train, unpenalized_columns, sub_cfg);

        for (Index l = 0; l < n_lambda; ++l) {
            double err = 0.0;
            for (Index i : held) {
                const double pred = design.row(i).dot(sub.coefficients.col(l));
                err += (response(i) - pred) * (response(i) - pred);
            }
            fold_mse(l, f) = err / static_cast<double>(held.size());
        }
    }

    path.cv_mean.resize(n_lambda);
    path.cv_se.resize(n_lambda);
    for (Index l = 0; l < n_lambda; ++l) {
        path.cv_mean(l) = fold_mse.row(l).mean();
        double ss = 0.0;
        for (int f = 0; f < k_folds; ++f) {
            const double d = fold_mse(l, f) - path.cv_mean(l);
            ss += d * d;
        }
        path.cv_se(l) = k_folds > 1
                            ? std::sqrt(ss / static_cast<double>(k_folds - 1) /
                                        static_cast<double>(k_folds))
                            : 0.0;
    }

    path.chosen_index = 0;
    for (Index l = 1; l < n_lambda; ++l) {
        if (path.cv_mean(l) < path.cv_mean(path.chosen_index)) {
            path.chosen_index = static_cast<int>(l);
        }
    }
    path.chosen_lambda = path.lambdas(path.chosen_index);
}

}  // namespace glaves
