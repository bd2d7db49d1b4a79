#include "glaves/validate.hpp"

#include <cmath>
#include <sstream>

#include "glaves/estimators.hpp"
#include "glaves/rng.hpp"
#include "glaves/simulation.hpp"

namespace glaves {

namespace {

struct Fixture {
    ExperimentalSample exp;
    TargetSample tgt;
};

Fixture random_fixture(std::uint64_t seed, Index n, Index m, int p, bool weighted) {
    auto engine = make_engine(seed, {0xf17u});
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    std::uniform_real_distribution<double> unif(0.5, 3.0);

    Fixture f;
    f.exp.x.resize(n, p);
    for (Index i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) f.exp.x(i, j) = normal(engine);
    f.exp.a.resize(n);
    f.exp.a.head(n / 2).setOnes();
    f.exp.a.tail(n - n / 2).setZero();
    f.exp.y.resize(n);
    for (Index i = 0; i < n; ++i) {
        f.exp.y(i) = f.exp.a(i) + f.exp.x(i, 0) +
                     0.5 * f.exp.a(i) * f.exp.x(i, 0) + normal(engine);
    }
    f.tgt.x_star.resize(m, p);
    for (Index i = 0; i < m; ++i)
        for (int j = 0; j < p; ++j)
            f.tgt.x_star(i, j) = normal(engine) + (j == 0 ? 1.0 : 0.0);
    if (weighted) {
        Vector w(m);
        for (Index i = 0; i < m; ++i) w(i) = unif(engine);
        f.tgt.raw_weights = w;
    }
    return f;
}

void add(std::vector<CheckResult>& checks, const std::string& name, bool ok,
         const std::string& detail = "") {
    checks.push_back({name, ok, ok ? "" : detail});
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

std::vector<CheckResult> run_validation_suite(std::uint64_t seed) {
    std::vector<CheckResult> checks;

    // Standardize round trip.
    {
        const Fixture f = random_fixture(seed, 40, 30, 3, true);
        const StandardizedData sd = standardize(f.exp, f.tgt);
        const ExperimentalSample back = unstandardize(sd.exp, sd.info);
        const TargetSample back_t = unstandardize(sd.tgt, sd.info);
        const double err =
            std::max({(back.y - f.exp.y).cwiseAbs().maxCoeff(),
                      (back.x - f.exp.x).cwiseAbs().maxCoeff(),
                      (back_t.x_star - f.tgt.x_star).cwiseAbs().maxCoeff()});
        add(checks, "standardize round trip", err <= 1e-12, "max error " + fmt(err));
    }

    // Weight normalization: mean one, scale invariance.
    {
        auto engine = make_engine(seed, {1});
        std::uniform_real_distribution<double> unif(0.1, 5.0);
        Vector r(25);
        for (Index i = 0; i < r.size(); ++i) r(i) = unif(engine);
        const NormalizedWeights w1 = normalize_weights(r);
        const NormalizedWeights w2 = normalize_weights(Vector(3.7 * r));
        const double mean_err = std::abs(w1.omega.mean() - 1.0);
        const double scale_err = (w1.omega - w2.omega).cwiseAbs().maxCoeff();
        add(checks, "weight normalization mean 1", mean_err <= 1e-12, fmt(mean_err));
        add(checks, "weight normalization scale invariance", scale_err <= 1e-12,
            fmt(scale_err));
    }

    // OLS against hand-rolled normal equations (Gaussian elimination).
    {
        auto engine = make_engine(seed, {2});
        std::normal_distribution<double> normal(0.0, 1.0);
        Matrix x(40, 4);
        Vector y(40);
        for (Index i = 0; i < 40; ++i) {
            for (Index j = 0; j < 4; ++j) x(i, j) = normal(engine);
            y(i) = normal(engine);
        }
        const LinearFit fit = fit_ols(x, y);

        Matrix gram = x.transpose() * x;
        Vector rhs = x.transpose() * y;
        for (Index col = 0; col < 4; ++col) {  // elimination without pivot search
            for (Index row = col + 1; row < 4; ++row) {
                const double factor = gram(row, col) / gram(col, col);
                gram.row(row) -= factor * gram.row(col);
                rhs(row) -= factor * rhs(col);
            }
        }
        Vector ref(4);
        for (Index row = 3; row >= 0; --row) {
            double acc = rhs(row);
            for (Index col = row + 1; col < 4; ++col) acc -= gram(row, col) * ref(col);
            ref(row) = acc / gram(row, row);
        }
        const double err = (fit.coefficients - ref).cwiseAbs().maxCoeff();
        add(checks, "least squares vs normal equations", err <= 1e-8, fmt(err));
    }

    // Joint objective gradient vs central finite differences.
    {
        const Fixture f = random_fixture(seed, 60, 40, 3, true);
        const StandardizedData sd = standardize(f.exp, f.tgt);
        double worst = 0.0;
        for (int variant = 0; variant < 2; ++variant) {
            const JointObjective obj(sd.exp, sd.tgt, make_omega(f.tgt),
                                     variant == 0 ? SelectionLoss::Bernoulli
                                                  : SelectionLoss::PlusMinusTwo);
            auto engine = make_engine(seed, {3, static_cast<std::uint64_t>(variant)});
            std::normal_distribution<double> normal(0.0, 0.5);
            for (int rep = 0; rep < 5; ++rep) {
                Vector alpha(obj.dim());
                for (Index i = 0; i < alpha.size(); ++i) alpha(i) = normal(engine);
                Vector grad;
                obj.gradient(alpha, grad);
                const double h = 1e-6;
                for (Index i = 0; i < alpha.size(); ++i) {
                    Vector ap = alpha, am = alpha;
                    ap(i) += h;
                    am(i) -= h;
                    const double fd = (obj.value(ap) - obj.value(am)) / (2.0 * h);
                    const double rel =
                        std::abs(fd - grad(i)) / std::max(1.0, std::abs(grad(i)));
                    worst = std::max(worst, rel);
                }
            }
        }
        add(checks, "joint objective gradient vs finite differences", worst <= 1e-5,
            "worst relative error " + fmt(worst));
    }

    // Path optimality and pair coupling on random fixtures.
    {
        double worst_kkt = 0.0;
        long coupling = 0;
        bool lambda_max_zero = true;
        for (int rep = 0; rep < 3; ++rep) {
            const Fixture f =
                random_fixture(seed + static_cast<std::uint64_t>(rep), 80, 50, 3, rep == 1);
            GlavesConfig cfg;
            cfg.n_lambdas = 40;
            const GlavesFit fit = glaves_fit(f.exp, f.tgt, cfg);

            const StandardizedData sd = standardize(f.exp, f.tgt, cfg.scaling);
            const JointObjective obj(sd.exp, sd.tgt, make_omega(f.tgt), cfg.selection_loss);
            const GroupStructure gs = GroupStructure::make(3);
            for (Index l = 0; l < fit.lambda_grid.size(); ++l) {
                Vector alpha(gs.dim());
                alpha.head(2 * 3 + 2) = fit.beta.col(l);
                alpha.tail(3 + 1) = fit.gamma.col(l);
                worst_kkt = std::max(
                    worst_kkt, kkt_residual(obj, gs, fit.weights, fit.lambda_grid(l), alpha));
            }
            coupling += fit.coupling_violations;
            for (int j = 0; j < 3; ++j)
                lambda_max_zero = lambda_max_zero && fit.beta(3 + j, 0) == 0.0 &&
                                  fit.beta(j, 0) == 0.0;
        }
        add(checks, "group subgradient optimality along the path", worst_kkt <= 1e-5,
            "worst residual " + fmt(worst_kkt));
        add(checks, "interaction/selection pair coupling", coupling == 0,
            std::to_string(coupling) + " violations");
        add(checks, "all penalized groups zero at lambda_max", lambda_max_zero);
    }

    // Unpenalized solve matches the least-squares / logistic oracles.
    {
        const Fixture f = random_fixture(seed, 120, 80, 2, false);
        const StandardizedData sd = standardize(f.exp, f.tgt);
        GlavesConfig cfg;
        cfg.explicit_lambdas = std::vector<double>{0.0};
        cfg.max_iterations = 20000;
        const GlavesFit fit = glaves_fit(f.exp, f.tgt, cfg);

        const LinearFit ols = fit_ols(outcome_design(sd.exp), sd.exp.y);
        Matrix vdesign(sd.exp.n() + sd.tgt.m(), 3);
        vdesign.topLeftCorner(sd.exp.n(), 2) = sd.exp.x;
        vdesign.bottomLeftCorner(sd.tgt.m(), 2) = sd.tgt.x_star;
        vdesign.col(2).setOnes();
        Vector labels = Vector::Zero(vdesign.rows());
        labels.head(sd.exp.n()).setOnes();
        const LogisticFit logit = fit_logistic(vdesign, labels);

        const double beta_err =
            (fit.beta.col(0) - ols.coefficients).cwiseAbs().maxCoeff();
        const double gamma_err =
            (fit.gamma.col(0) - logit.coefficients).cwiseAbs().maxCoeff();
        add(checks, "lambda=0 solve matches unpenalized oracles",
            beta_err <= 1e-4 && gamma_err <= 1e-4,
            "beta " + fmt(beta_err) + ", gamma " + fmt(gamma_err));
    }

    // Lasso path: orthonormal closed form and KKT conditions.
    {
        auto engine = make_engine(seed, {4});
        std::normal_distribution<double> normal(0.0, 1.0);
        const Index n = 32;
        Matrix raw(n, 4);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < 4; ++j) raw(i, j) = normal(engine);
        const Matrix q = Eigen::HouseholderQR<Matrix>(raw).householderQ() *
                         Matrix::Identity(n, 4);
        const Matrix x = std::sqrt(static_cast<double>(n)) * q;  // X'X = n I
        Vector y(n);
        for (Index i = 0; i < n; ++i) y(i) = normal(engine);

        LassoConfig cfg;
        cfg.n_lambdas = 20;
        const LassoPath path = fit_lasso_path(x, y, {}, cfg);
        double worst = 0.0;
        for (Index l = 0; l < path.lambdas.size(); ++l) {
            for (Index j = 0; j < 4; ++j) {
                const double z = x.col(j).dot(y) / static_cast<double>(n);
                const double lam = path.lambdas(l);
                const double expected =
                    z > lam ? z - lam : (z < -lam ? z + lam : 0.0);
                worst = std::max(worst, std::abs(path.coefficients(j, l) - expected));
            }
        }
        add(checks, "lasso matches orthonormal soft-threshold solution", worst <= 1e-6,
            fmt(worst));

        double worst_kkt = 0.0;
        for (Index l = 0; l < path.lambdas.size(); ++l) {
            const Vector resid = y - x * path.coefficients.col(l);
            for (Index j = 0; j < 4; ++j) {
                const double g = x.col(j).dot(resid) / static_cast<double>(n);
                if (path.coefficients(j, l) == 0.0) {
                    worst_kkt = std::max(worst_kkt, std::abs(g) - path.lambdas(l));
                } else {
                    const double sign = path.coefficients(j, l) > 0.0 ? 1.0 : -1.0;
                    worst_kkt = std::max(worst_kkt, std::abs(g - sign * path.lambdas(l)));
                }
            }
        }
        add(checks, "lasso KKT conditions along the path", worst_kkt <= 1e-6, fmt(worst_kkt));
    }

    // Survey-weight invariances across every estimator that consumes targets.
    {
        const Fixture f = random_fixture(seed, 80, 60, 3, false);
        TargetSample uniform = f.tgt;
        uniform.raw_weights = Vector::Constant(f.tgt.m(), 2.5);
        TargetSample scaled = f.tgt;
        scaled.raw_weights = Vector(f.tgt.m());
        auto engine = make_engine(seed, {5});
        std::uniform_real_distribution<double> unif(0.5, 4.0);
        for (Index i = 0; i < f.tgt.m(); ++i) (*scaled.raw_weights)(i) = unif(engine);
        TargetSample rescaled = scaled;
        rescaled.raw_weights = Vector(7.25 * *scaled.raw_weights);

        double worst_uniform = 0.0, worst_scale = 0.0;
        EstimatorConfig cfg;
        cfg.cv.seed = 11;
        cfg.glaves.n_lambdas = 30;
        cfg.lasso.n_lambdas = 30;
        for (Method method : all_methods()) {
            const double base = run_method(method, f.exp, f.tgt, cfg).estimate.point;
            const double uni = run_method(method, f.exp, uniform, cfg).estimate.point;
            const double v1 = run_method(method, f.exp, scaled, cfg).estimate.point;
            const double v2 = run_method(method, f.exp, rescaled, cfg).estimate.point;
            worst_uniform = std::max(worst_uniform, std::abs(uni - base));
            worst_scale = std::max(worst_scale, std::abs(v2 - v1));
        }
        add(checks, "uniform survey weights match the unweighted estimates",
            worst_uniform <= 1e-10, fmt(worst_uniform));
        add(checks, "survey-weight scale invariance", worst_scale <= 1e-10,
            fmt(worst_scale));
    }

    // Determinism of the seeded scenario runner, including across workers.
    {
        const ScenarioSpec spec = ScenarioSpec::builtin(1);
        const std::vector<Method> methods = {Method::SDiff, Method::Ols};
        const ScenarioSummary a = run_scenario(spec, methods, 8, seed, 1);
        const ScenarioSummary b = run_scenario(spec, methods, 8, seed, 3);
        bool same = a.methods.size() == b.methods.size();
        for (std::size_t k = 0; same && k < a.methods.size(); ++k) {
            same = a.methods[k].bias == b.methods[k].bias &&
                   a.methods[k].mse == b.methods[k].mse &&
                   a.methods[k].sd == b.methods[k].sd;
        }
        add(checks, "seeded scenario runs are worker-count independent", same);
    }

    return checks;
}

}  // namespace glaves
