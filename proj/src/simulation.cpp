#include "glaves/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "glaves/rng.hpp"

namespace glaves {

namespace {

std::vector<int> range_vec(int lo, int hi) {  // [lo, hi] inclusive, 0-based
    std::vector<int> v;
    for (int i = lo; i <= hi; ++i) v.push_back(i);
    return v;
}

// Lower Cholesky factor of the block compound-symmetric correlation matrix.
Matrix correlation_cholesky(const ScenarioSpec& spec) {
    Matrix sigma = Matrix::Identity(spec.p, spec.p);
    for (const auto& block : spec.correlated_blocks) {
        for (std::size_t a = 0; a < block.size(); ++a)
            for (std::size_t b = a + 1; b < block.size(); ++b) {
                sigma(block[a], block[b]) = spec.block_correlation;
                sigma(block[b], block[a]) = spec.block_correlation;
            }
    }
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("correlation matrix is not positive definite");
    return llt.matrixL();
}

void fill_mvn_rows(Matrix& x, const Matrix& chol, std::mt19937_64& engine,
                   std::normal_distribution<double>& normal) {
    Vector z(x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) z(j) = normal(engine);
        x.row(i) = (chol * z).transpose();
    }
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mu) * (x - mu);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Runs jobs 0..count-1 over `workers` threads; each job writes its own slot,
// so results do not depend on the worker count.
template <class Job>
void run_jobs(int count, int workers, Job&& job) {
    workers = std::max(1, workers);
    if (workers == 1) {
        for (int i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                job(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

ScenarioSpec ScenarioSpec::builtin(int id) {
    ScenarioSpec s;
    s.id = id;
    switch (id) {
        case 1:
        case 2:
        case 3:
        case 4:
            s.p = 8;
            s.main_effect_covariates = {0, 2};
            s.interaction_covariates = {0, 2};
            s.interaction_coefficient = (id == 1 || id == 3) ? 0.1 : 0.05;
            s.shifted_covariates = {0, 1, 2};
            if (id >= 3) s.correlated_blocks = {{0, 1}, {2, 3}};
            break;
        case 5:
        case 6:
        case 7:
        case 8:
            s.p = 15;
            s.main_effect_covariates = {0, 1};
            s.interaction_covariates = {0, 2, 4};
            s.interaction_coefficient = (id == 5 || id == 7) ? 0.1 : 0.05;
            s.shifted_covariates = range_vec(0, 6);
            if (id >= 7) s.correlated_blocks = {{0, 1}, {2, 3}, {4, 5, 6}, {7, 8, 9}};
            break;
        default:
            throw std::invalid_argument("unknown scenario " + std::to_string(id) +
                                        " (built-in scenarios are 1-8)");
    }
    return s;
}

void ScenarioSpec::validate() const {
    if (p < 1) throw std::invalid_argument("scenario needs p >= 1");
    if (n < 2 || m < 1) throw std::invalid_argument("scenario sample sizes too small");
    if (!std::isfinite(interaction_coefficient) || !std::isfinite(noise_sd) ||
        noise_sd < 0.0)
        throw std::invalid_argument("non-finite scenario coefficients");
    auto in_range = [this](const std::vector<int>& idx) {
        return std::all_of(idx.begin(), idx.end(),
                           [this](int j) { return j >= 0 && j < p; });
    };
    if (!in_range(interaction_covariates) || !in_range(main_effect_covariates) ||
        !in_range(shifted_covariates))
        throw std::invalid_argument("scenario covariate index out of range");
    std::set<int> seen;
    for (const auto& block : this->correlated_blocks) {
        if (!in_range(block)) throw std::invalid_argument("block index out of range");
        for (int j : block) {
            if (!seen.insert(j).second)
                throw std::invalid_argument("correlated blocks must be disjoint");
        }
    }
}

double true_tate(const ScenarioSpec& spec) {
    double tate = 1.0;
    for (int j : spec.interaction_covariates) {
        const bool shifted = std::find(spec.shifted_covariates.begin(),
                                       spec.shifted_covariates.end(),
                                       j) != spec.shifted_covariates.end();
        if (shifted) tate += spec.interaction_coefficient;
    }
    return tate;
}

std::pair<ExperimentalSample, TargetSample> generate_replicate(const ScenarioSpec& spec,
                                                               std::uint64_t seed) {
    spec.validate();
    auto engine = make_engine(seed, {0xdafau});
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);

    const Matrix chol = correlation_cholesky(spec);

    ExperimentalSample exp;
    exp.x.resize(spec.n, spec.p);
    fill_mvn_rows(exp.x, chol, engine, normal);

    exp.a.resize(spec.n);
    for (Index i = 0; i < spec.n; ++i) exp.a(i) = coin(engine) ? 1.0 : 0.0;

    exp.y.resize(spec.n);
    for (Index i = 0; i < spec.n; ++i) {
        double mean = exp.a(i);
        for (int j : spec.main_effect_covariates) mean += exp.x(i, j);
        for (int j : spec.interaction_covariates)
            mean += spec.interaction_coefficient * exp.a(i) * exp.x(i, j);
        exp.y(i) = mean + spec.noise_sd * normal(engine);
    }

    TargetSample tgt;
    tgt.x_star.resize(spec.m, spec.p);
    if (spec.target_correlated) {
        fill_mvn_rows(tgt.x_star, chol, engine, normal);
    } else {
        for (Index i = 0; i < spec.m; ++i)
            for (Index j = 0; j < spec.p; ++j) tgt.x_star(i, j) = normal(engine);
    }
    for (int j : spec.shifted_covariates) tgt.x_star.col(j).array() += 1.0;

    return {std::move(exp), std::move(tgt)};
}

ScenarioSummary run_scenario(const ScenarioSpec& spec, const std::vector<Method>& methods,
                             int replicates, std::uint64_t base_seed, int workers,
                             const EstimatorConfig& cfg) {
    spec.validate();
    if (replicates < 1) throw std::invalid_argument("need at least 1 replicate");

    const double truth = true_tate(spec);
    const std::size_t n_methods = methods.size();

    struct Slot {
        std::vector<double> estimate;
        std::vector<char> failed;
        std::vector<double> sens;
        std::vector<double> spec;
        long coupling = 0;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(replicates));

    std::set<int> truth_set(spec.interaction_covariates.begin(),
                            spec.interaction_covariates.end());
    const auto n_truth = static_cast<double>(truth_set.size());
    const auto n_nontruth = static_cast<double>(spec.p) - n_truth;

    run_jobs(replicates, workers, [&](int r) {
        Slot& slot = slots[static_cast<std::size_t>(r)];
        slot.estimate.assign(n_methods, 0.0);
        slot.failed.assign(n_methods, 0);
        slot.sens.assign(n_methods, 0.0);
        slot.spec.assign(n_methods, 0.0);

        auto [exp, tgt] = generate_replicate(
            spec, derive_seed(base_seed, {static_cast<std::uint64_t>(r), 0x01u}));

        EstimatorConfig rep_cfg = cfg;
        rep_cfg.cv.seed =
            derive_seed(base_seed, {static_cast<std::uint64_t>(r), 0x02u});

        // Share the GLAVeS fit across GLAVeS/OLSGLAVeS by running jointly.
        std::vector<EstimatorResult> results(n_methods);
        std::vector<std::size_t> glaves_like;
        for (std::size_t k = 0; k < n_methods; ++k) {
            if (methods[k] == Method::Glaves || methods[k] == Method::OlsGlaves)
                glaves_like.push_back(k);
        }
        auto record_failure = [&](std::size_t k) { slot.failed[k] = 1; };

        if (!glaves_like.empty()) {
            try {
                const GlavesFit fit = glaves_fit(exp, tgt, rep_cfg.glaves);
                slot.coupling = fit.coupling_violations;
                const std::optional<NormalizedWeights> omega = make_omega(tgt);
                for (std::size_t k : glaves_like) {
                    EstimatorResult res;
                    if (methods[k] == Method::Glaves) {
                        const StandardizedData std_data =
                            standardize(exp, tgt, rep_cfg.glaves.scaling);
                        res.estimate = estimate_tate_glaves(fit, std_data.tgt, omega);
                    } else {
                        res.estimate = refit_olsglaves(exp, fit.selected_main_effects,
                                                       fit.selected_interactions, tgt,
                                                       omega);
                    }
                    res.selected_interactions = fit.selected_interactions;
                    res.selected_main_effects = fit.selected_main_effects;
                    results[k] = std::move(res);
                }
            } catch (const std::exception&) {
                for (std::size_t k : glaves_like) record_failure(k);
            }
        }
        for (std::size_t k = 0; k < n_methods; ++k) {
            if (methods[k] == Method::Glaves || methods[k] == Method::OlsGlaves) continue;
            try {
                results[k] = run_method(methods[k], exp, tgt, rep_cfg);
            } catch (const std::exception&) {
                record_failure(k);
            }
        }

        for (std::size_t k = 0; k < n_methods; ++k) {
            if (slot.failed[k]) continue;
            slot.estimate[k] = results[k].estimate.point;
            double hits = 0.0, rejected_nontruth = 0.0;
            std::set<int> sel(results[k].selected_interactions.begin(),
                              results[k].selected_interactions.end());
            for (int j = 0; j < spec.p; ++j) {
                const bool is_truth = truth_set.count(j) > 0;
                const bool is_sel = sel.count(j) > 0;
                if (is_truth && is_sel) hits += 1.0;
                if (!is_truth && !is_sel) rejected_nontruth += 1.0;
            }
            slot.sens[k] = n_truth > 0 ? hits / n_truth : 0.0;
            slot.spec[k] = n_nontruth > 0 ? rejected_nontruth / n_nontruth : 0.0;
        }
    });

    ScenarioSummary summary;
    summary.scenario_id = spec.id;
    summary.truth = truth;
    summary.replicates = replicates;
    for (const Slot& slot : slots) summary.glaves_coupling_violations += slot.coupling;

    for (std::size_t k = 0; k < n_methods; ++k) {
        MethodSummary ms;
        ms.method = methods[k];
        std::vector<double> est, sens, specv, sqerr;
        for (const Slot& slot : slots) {
            if (slot.failed[k]) {
                ++ms.n_failed;
                continue;
            }
            est.push_back(slot.estimate[k]);
            sens.push_back(slot.sens[k]);
            specv.push_back(slot.spec[k]);
            sqerr.push_back((slot.estimate[k] - truth) * (slot.estimate[k] - truth));
        }
        if (ms.n_failed * 100 > replicates) {
            std::ostringstream os;
            os << method_name(methods[k]) << " failed on " << ms.n_failed << "/"
               << replicates << " replicates (over the 1% cap)";
            throw std::runtime_error(os.str());
        }
        if (est.empty()) throw std::runtime_error("no successful replicates");

        ms.n_used = static_cast<int>(est.size());
        ms.bias = mean_of(est) - truth;
        ms.mse = mean_of(sqerr);
        ms.sd = sample_sd_of(est);
        ms.sensitivity = mean_of(sens);
        ms.specificity = mean_of(specv);
        ms.sensitivity_defined = n_truth > 0;
        ms.specificity_defined = n_nontruth > 0;
        const double root_r = std::sqrt(static_cast<double>(ms.n_used));
        ms.mc_se_bias = ms.sd / root_r;
        ms.mc_se_mse = sample_sd_of(sqerr) / root_r;
        ms.mc_se_sensitivity = sample_sd_of(sens) / root_r;
        ms.mc_se_specificity = sample_sd_of(specv) / root_r;
        summary.methods.push_back(ms);
    }
    return summary;
}

const char* MotivatingStudyResult::distribution_label(int d) {
    return d == 0 ? "same" : "different";
}

const char* MotivatingStudyResult::model_label(int g) {
    switch (g) {
        case 0: return "treatment-only";
        case 1: return "main-effect";
        default: return "interaction";
    }
}

MotivatingStudyResult run_motivating_study(int replicates, std::uint64_t seed,
                                           double noise_sd, int workers) {
    if (replicates < 1) throw std::invalid_argument("need at least 1 replicate");
    constexpr int n = 300;
    constexpr int m = 900;

    MotivatingStudyResult result;
    result.replicates = replicates;

    for (int d = 0; d < 2; ++d)
        for (int g = 0; g < 3; ++g)
            result.truth[static_cast<std::size_t>(d)][static_cast<std::size_t>(g)] =
                (g == 2 && d == 1) ? 2.0 : 1.0;

    // errs[d][g][model][replicate]
    std::vector<double> errs(2 * 3 * 3 * static_cast<std::size_t>(replicates), 0.0);
    auto err_at = [&](int d, int g, int model, int r) -> double& {
        return errs[((static_cast<std::size_t>(d) * 3 + static_cast<std::size_t>(g)) * 3 +
                     static_cast<std::size_t>(model)) *
                        static_cast<std::size_t>(replicates) +
                    static_cast<std::size_t>(r)];
    };

    run_jobs(replicates, workers, [&](int r) {
        for (int d = 0; d < 2; ++d) {
            for (int g = 0; g < 3; ++g) {
                auto engine = make_engine(
                    seed, {static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(d),
                           static_cast<std::uint64_t>(g)});
                std::normal_distribution<double> normal(0.0, 1.0);
                std::bernoulli_distribution coin(0.5);

                Vector x(n), a(n), y(n);
                for (int i = 0; i < n; ++i) x(i) = normal(engine);
                for (int i = 0; i < n; ++i) a(i) = coin(engine) ? 1.0 : 0.0;
                for (int i = 0; i < n; ++i) {
                    double mean = a(i);
                    if (g >= 1) mean += x(i);
                    if (g == 2) mean += a(i) * x(i);
                    y(i) = mean + noise_sd * normal(engine);
                }
                // Target covariates are the shifted set in the mismatched case.
                double xstar_mean = 0.0;
                for (int i = 0; i < m; ++i)
                    xstar_mean += normal(engine) + (d == 1 ? 1.0 : 0.0);
                xstar_mean /= static_cast<double>(m);

                const double truth =
                    result.truth[static_cast<std::size_t>(d)][static_cast<std::size_t>(g)];

                for (int model = 0; model < 3; ++model) {
                    Matrix design(n, 2 + model);
                    design.col(0).setOnes();
                    design.col(1) = a;
                    if (model >= 1) design.col(2) = x;
                    if (model == 2) design.col(3) = a.array() * x.array();
                    const LinearFit fit = fit_ols(design, y);
                    double est = fit.coefficients(1);
                    if (model == 2) est += fit.coefficients(3) * xstar_mean;
                    const double e = est - truth;
                    err_at(d, g, model, r) = e * e;
                }
            }
        }
    });

    for (int d = 0; d < 2; ++d) {
        for (int g = 0; g < 3; ++g) {
            for (int model = 0; model < 3; ++model) {
                std::vector<double> cell(static_cast<std::size_t>(replicates));
                for (int r = 0; r < replicates; ++r) cell[static_cast<std::size_t>(r)] =
                    err_at(d, g, model, r);
                auto& out = result.cells[static_cast<std::size_t>(d)]
                                        [static_cast<std::size_t>(g)]
                                        [static_cast<std::size_t>(model)];
                out.mse = mean_of(cell);
                out.mc_se = sample_sd_of(cell) /
                            std::sqrt(static_cast<double>(replicates));
            }
        }
    }
    return result;
}

}  // namespace glaves
