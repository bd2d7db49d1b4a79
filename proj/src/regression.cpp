#include "glaves/regression.hpp"

#include <cmath>
#include <stdexcept>

namespace glaves {

namespace {

void require_finite(const Matrix& design, const Vector& response) {
    if (!design.allFinite()) throw std::invalid_argument("non-finite design entries");
    if (!response.allFinite()) throw std::invalid_argument("non-finite response entries");
}

double bernoulli_nll(const Vector& eta, const Vector& labels, const Vector* w) {
    double nll = 0.0;
    for (Index i = 0; i < eta.size(); ++i) {
        const double e = eta(i);
        // log(1 + exp(e)) - s*e, stable on both tails
        const double term =
            e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        const double wi = w ? (*w)(i) : 1.0;
        nll += wi * (term - labels(i) * e);
    }
    return nll;
}

}  // namespace

LinearFit fit_ols(const Matrix& design, const Vector& response,
                  const Vector* observation_weights) {
    require_finite(design, response);
    if (design.rows() != response.size())
        throw std::invalid_argument("design/response row mismatch");
    if (observation_weights) {
        if (observation_weights->size() != design.rows())
            throw std::invalid_argument("weight vector length mismatch");
        if ((observation_weights->array() < 0.0).any())
            throw std::invalid_argument("negative observation weight");
    }

    const Index k = design.cols();
    LinearFit fit;

    Matrix dw = design;
    Vector rw = response;
    if (observation_weights) {
        const Vector sw = observation_weights->array().sqrt();
        dw.array().colwise() *= sw.array();
        rw.array() *= sw.array();
    }

    Eigen::ColPivHouseholderQR<Matrix> qr(dw);
    if (qr.rank() < k) {
        fit.rank_deficient = true;
        Matrix gram = dw.transpose() * dw;
        gram.diagonal().array() += kCoefficientFloor;
        fit.coefficients = gram.ldlt().solve(dw.transpose() * rw);
    } else {
        fit.coefficients = qr.solve(rw);
    }

    Vector resid = response - design * fit.coefficients;
    if (observation_weights) {
        fit.residual_sum_squares =
            (observation_weights->array() * resid.array().square()).sum();
    } else {
        fit.residual_sum_squares = resid.squaredNorm();
    }
    return fit;
}

LogisticFit fit_logistic(const Matrix& design, const Vector& labels,
                         const Vector* observation_weights, int max_iterations,
                         double grad_tol, double coef_norm_cap,
                         std::vector<double>* nll_trace) {
    require_finite(design, labels);
    const Index n = design.rows();
    const Index k = design.cols();
    if (labels.size() != n) throw std::invalid_argument("design/label row mismatch");

    bool has0 = false, has1 = false;
    for (Index i = 0; i < n; ++i) {
        if (labels(i) == 0.0)
            has0 = true;
        else if (labels(i) == 1.0)
            has1 = true;
        else
            throw std::invalid_argument("labels must be 0/1");
    }
    if (!has0 || !has1) throw std::invalid_argument("single-class labels");

    LogisticFit fit;
    fit.coefficients = Vector::Zero(k);

    Vector eta = Vector::Zero(n);
    double nll = bernoulli_nll(eta, labels, observation_weights);
    if (nll_trace) nll_trace->push_back(nll);

    for (int it = 0; it < max_iterations; ++it) {
        const Vector prob = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
        Vector score = prob - labels;
        if (observation_weights) score.array() *= observation_weights->array();
        const Vector grad = design.transpose() * score;
        if (grad.norm() < grad_tol) {
            fit.converged = true;
            break;
        }

        Vector w = (prob.array() * (1.0 - prob.array())).matrix();
        if (observation_weights) w.array() *= observation_weights->array();
        Matrix hess = design.transpose() * w.asDiagonal() * design;
        hess.diagonal().array() += 1e-12;

        const Vector step = hess.ldlt().solve(grad);

        // Halve until the objective decreases.
        double t = 1.0;
        Vector cand;
        double cand_nll = nll;
        bool moved = false;
        while (t > 1e-10) {
            cand = fit.coefficients - t * step;
            Vector cand_eta = design * cand;
            cand_nll = bernoulli_nll(cand_eta, labels, observation_weights);
            if (cand_nll <= nll) {
                fit.coefficients = cand;
                eta = std::move(cand_eta);
                nll = cand_nll;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (nll_trace) nll_trace->push_back(nll);
        if (!moved) break;

        if (fit.coefficients.norm() > coef_norm_cap) {
            // Likely perfect separation; stop at the cap.
            fit.coefficients *= coef_norm_cap / fit.coefficients.norm();
            eta = design * fit.coefficients;
            nll = bernoulli_nll(eta, labels, observation_weights);
            fit.converged = false;
            fit.final_negative_log_likelihood = nll;
            return fit;
        }
    }

    fit.final_negative_log_likelihood = nll;
    return fit;
}

Matrix outcome_design(const ExperimentalSample& exp) {
    const Index n = exp.n();
    const Index p = exp.p();
    Matrix design(n, 2 * p + 2);
    design.leftCols(p) = exp.x;
    for (Index j = 0; j < p; ++j)
        design.col(p + j) = exp.a.array() * exp.x.col(j).array();
    design.col(2 * p) = Vector::Ones(n);
    design.col(2 * p + 1) = exp.a;
    return design;
}

FullModelCoefficients full_outcome_model_coefficients(const ExperimentalSample& scaled_exp) {
    const LinearFit fit = fit_ols(outcome_design(scaled_exp), scaled_exp.y);

    FullModelCoefficients out;
    out.rank_deficient = fit.rank_deficient;
    out.v = fit.coefficients;
    for (Index k = 0; k < out.v.size(); ++k) {
        if (std::abs(out.v(k)) < kCoefficientFloor)
            out.v(k) = out.v(k) < 0.0 ? -kCoefficientFloor : kCoefficientFloor;
    }
    return out;
}

}  // namespace glaves
