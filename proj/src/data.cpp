#include "glaves/data.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace glaves {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

// Reports the first non-finite entry with 1-based row/column.
void check_finite_matrix(const Matrix& m, const char* what) {
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) {
            if (!std::isfinite(m(i, j))) {
                std::ostringstream os;
                os << what << " has non-finite value at row " << (i + 1) << ", column "
                   << (j + 1);
                fail(os.str());
            }
        }
    }
}

void check_finite_vector(const Vector& v, const char* what) {
    for (Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v(i))) {
            std::ostringstream os;
            os << what << " has non-finite value at row " << (i + 1);
            fail(os.str());
        }
    }
}

}  // namespace

double sample_sd(const Vector& v) {
    const Index n = v.size();
    if (n < 2) return 0.0;
    const double mean = v.mean();
    const double ss = (v.array() - mean).square().sum();
    return std::sqrt(ss / static_cast<double>(n - 1));
}

void validate_pair(const ExperimentalSample& exp, const TargetSample& tgt) {
    const Index n = exp.n();
    if (n < 2) fail("experimental sample needs at least 2 rows");
    if (exp.a.size() != n || exp.x.rows() != n)
        fail("experimental outcome, treatment, and covariate row counts disagree");
    if (tgt.m() < 1) fail("target sample needs at least 1 row");
    if (exp.p() != tgt.p()) {
        std::ostringstream os;
        os << "dimension mismatch: experimental has " << exp.p()
           << " covariates, target has " << tgt.p();
        fail(os.str());
    }

    check_finite_vector(exp.y, "experimental outcome");
    check_finite_vector(exp.a, "experimental treatment");
    check_finite_matrix(exp.x, "experimental covariate matrix");
    check_finite_matrix(tgt.x_star, "target covariate matrix");

    Index treated = 0;
    for (Index i = 0; i < n; ++i) {
        const double ai = exp.a(i);
        if (ai != 0.0 && ai != 1.0) {
            std::ostringstream os;
            os << "treatment vector must be 0/1; found " << ai << " at row " << (i + 1);
            fail(os.str());
        }
        treated += (ai == 1.0);
    }
    if (treated == 0) fail("empty treatment arm: no treated rows");
    if (treated == n) fail("empty treatment arm: no control rows");

    for (Index j = 0; j < exp.p(); ++j) {
        if (exp.x.col(j).maxCoeff() == exp.x.col(j).minCoeff()) {
            std::ostringstream os;
            os << "constant covariate column " << (j + 1) << " in experimental sample";
            fail(os.str());
        }
    }

    if (tgt.raw_weights) {
        const Vector& r = *tgt.raw_weights;
        if (r.size() != tgt.m()) fail("weight vector length does not match target rows");
        for (Index i = 0; i < r.size(); ++i) {
            if (!std::isfinite(r(i)) || r(i) <= 0.0) {
                std::ostringstream os;
                os << "non-positive survey weight at row " << (i + 1);
                fail(os.str());
            }
        }
    }
}

StandardizedData standardize(const ExperimentalSample& exp, const TargetSample& tgt,
                             ScalingPolicy policy) {
    const Index p = exp.p();

    StandardizationInfo info;
    info.policy = policy;
    info.sd_y = sample_sd(exp.y);
    if (info.sd_y <= 0.0) fail("zero-variance outcome");

    info.sd_x.resize(p);
    for (Index j = 0; j < p; ++j) {
        double sd;
        if (policy == ScalingPolicy::ExperimentalSd) {
            sd = sample_sd(exp.x.col(j));
        } else {
            Vector pooled(exp.n() + tgt.m());
            pooled << exp.x.col(j), tgt.x_star.col(j);
            sd = sample_sd(pooled);
        }
        if (sd <= 0.0) {
            std::ostringstream os;
            os << "zero-variance covariate column " << (j + 1);
            fail(os.str());
        }
        info.sd_x(j) = sd;
    }

    StandardizedData out;
    out.info = info;
    out.exp.y = exp.y / info.sd_y;
    out.exp.a = exp.a;
    out.exp.x = exp.x;
    out.tgt.x_star = tgt.x_star;
    out.tgt.raw_weights = tgt.raw_weights;
    for (Index j = 0; j < p; ++j) {
        out.exp.x.col(j) /= info.sd_x(j);
        out.tgt.x_star.col(j) /= info.sd_x(j);
    }
    return out;
}

ExperimentalSample unstandardize(const ExperimentalSample& scaled,
                                 const StandardizationInfo& info) {
    ExperimentalSample out;
    out.y = scaled.y * info.sd_y;
    out.a = scaled.a;
    out.x = scaled.x;
    for (Index j = 0; j < out.x.cols(); ++j) out.x.col(j) *= info.sd_x(j);
    return out;
}

TargetSample unstandardize(const TargetSample& scaled, const StandardizationInfo& info) {
    TargetSample out;
    out.x_star = scaled.x_star;
    out.raw_weights = scaled.raw_weights;
    for (Index j = 0; j < out.x_star.cols(); ++j) out.x_star.col(j) *= info.sd_x(j);
    return out;
}

NormalizedWeights normalize_weights(const Vector& raw_weights) {
    const Index m = raw_weights.size();
    if (m < 1) fail("empty weight vector");
    for (Index i = 0; i < m; ++i) {
        if (!std::isfinite(raw_weights(i)) || raw_weights(i) <= 0.0) {
            std::ostringstream os;
            os << "non-positive survey weight at row " << (i + 1);
            fail(os.str());
        }
    }
    NormalizedWeights out;
    out.omega = raw_weights * (static_cast<double>(m) / raw_weights.sum());
    return out;
}

std::optional<NormalizedWeights> make_omega(const TargetSample& tgt) {
    if (!tgt.raw_weights) return std::nullopt;
    return normalize_weights(*tgt.raw_weights);
}

}  // namespace glaves
