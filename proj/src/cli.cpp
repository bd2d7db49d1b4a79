#include "glaves/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "glaves/csv.hpp"
#include "glaves/rng.hpp"
#include "glaves/simulation.hpp"
#include "glaves/validate.hpp"

namespace glaves {

namespace {

struct CommonOptions {
    std::uint64_t seed = 0;
    int workers = 1;
    std::string format = "csv";
    std::string out_path;
    int folds = 10;
    int lambda_count = 100;
    double lambda_min_ratio = 1e-3;
    int bootstrap = 100;
    bool literal_v = false;
    std::string selection_loss = "bernoulli";
    std::string scaling = "experimental";
    std::vector<std::string> methods;
};

int env_default_workers() {
    if (const char* env = std::getenv("GLAVES_WORKERS")) {
        const int w = std::atoi(env);
        if (w >= 1) return w;
    }
    return 1;
}

EstimatorConfig build_estimator_config(const CommonOptions& opt) {
    EstimatorConfig cfg;
    cfg.cv.k_folds = opt.folds;
    cfg.lasso.n_lambdas = opt.lambda_count;
    cfg.lasso.lambda_min_ratio = opt.lambda_min_ratio;
    cfg.glaves.n_lambdas = opt.lambda_count;
    cfg.glaves.lambda_min_ratio = opt.lambda_min_ratio;
    cfg.glaves.v_mode = opt.literal_v ? VMode::LiteralInteraction : VMode::Grouped;
    if (opt.selection_loss == "bernoulli") {
        cfg.glaves.selection_loss = SelectionLoss::Bernoulli;
    } else if (opt.selection_loss == "pm2") {
        cfg.glaves.selection_loss = SelectionLoss::PlusMinusTwo;
    } else {
        throw std::invalid_argument("unknown selection loss '" + opt.selection_loss +
                                    "' (expected bernoulli or pm2)");
    }
    if (opt.scaling == "experimental") {
        cfg.glaves.scaling = ScalingPolicy::ExperimentalSd;
    } else if (opt.scaling == "pooled") {
        cfg.glaves.scaling = ScalingPolicy::PooledSd;
    } else {
        throw std::invalid_argument("unknown scaling policy '" + opt.scaling +
                                    "' (expected experimental or pooled)");
    }
    return cfg;
}

std::vector<Method> resolve_methods(const std::vector<std::string>& names) {
    if (names.empty()) return all_methods();
    std::vector<Method> methods;
    for (const auto& name : names) methods.push_back(parse_method(name));
    return methods;
}

nlohmann::json manifest_common(const std::string& command, const CommonOptions& opt) {
    nlohmann::json cfg;
    cfg["seed"] = opt.seed;
    cfg["workers"] = opt.workers;
    cfg["format"] = opt.format;
    cfg["folds"] = opt.folds;
    cfg["lambda_count"] = opt.lambda_count;
    cfg["lambda_min_ratio"] = opt.lambda_min_ratio;
    cfg["bootstrap"] = opt.bootstrap;
    cfg["literal_v"] = opt.literal_v;
    cfg["selection_loss"] = opt.selection_loss;
    cfg["scaling"] = opt.scaling;
    nlohmann::json methods = nlohmann::json::array();
    for (Method m : resolve_methods(opt.methods)) methods.push_back(method_name(m));
    cfg["methods"] = std::move(methods);

    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["command"] = command;
    manifest["seed"] = opt.seed;
    manifest["config"] = std::move(cfg);
    return manifest;
}

// Writes the table (and manifest sidecar) to --out, or a rounded display
// table to stdout with the manifest on stderr.
void emit(const Table& table, const nlohmann::json& manifest, const CommonOptions& opt,
          std::ostream& out, std::ostream& err) {
    if (opt.out_path.empty()) {
        out << to_display(table);
        err << "manifest: " << manifest.dump() << "\n";
        return;
    }
    std::ofstream file(opt.out_path, std::ios::binary);
    if (!file) throw std::invalid_argument("cannot write '" + opt.out_path + "'");
    file << (opt.format == "json" ? to_json(table) : to_csv(table));
    std::ofstream mfile(opt.out_path + ".manifest.json", std::ios::binary);
    mfile << manifest.dump(2) << "\n";
}

Cell selection_cell(const std::vector<int>& indices) {
    if (indices.empty()) return Cell::str("none");
    std::string text;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (i) text += ';';
        text += "x" + std::to_string(indices[i] + 1);
    }
    return Cell::str(text);
}

Table summary_table(const std::vector<ScenarioSummary>& summaries) {
    Table table;
    table.columns = {"scenario",        "method",
                     "truth",           "bias",
                     "mse",             "sd",
                     "sensitivity",     "specificity",
                     "mc_se_bias",      "mc_se_mse",
                     "mc_se_sensitivity", "mc_se_specificity",
                     "replicates_used", "replicates_failed",
                     "note"};
    for (const auto& summary : summaries) {
        for (const auto& ms : summary.methods) {
            std::string note;
            std::vector<Cell> row;
            row.push_back(Cell::num(summary.scenario_id));
            row.push_back(Cell::str(method_name(ms.method)));
            row.push_back(Cell::num(summary.truth));
            row.push_back(Cell::num(ms.bias));
            row.push_back(Cell::num(ms.mse));
            row.push_back(Cell::num(ms.sd));
            if (ms.sensitivity_defined) {
                row.push_back(Cell::num(ms.sensitivity));
            } else {
                row.push_back(Cell::na());
                note = "no true interactions in scenario";
            }
            if (ms.specificity_defined) {
                row.push_back(Cell::num(ms.specificity));
            } else {
                row.push_back(Cell::na());
                note = "every covariate is a true interaction";
            }
            row.push_back(Cell::num(ms.mc_se_bias));
            row.push_back(Cell::num(ms.mc_se_mse));
            row.push_back(ms.sensitivity_defined ? Cell::num(ms.mc_se_sensitivity)
                                                 : Cell::na());
            row.push_back(ms.specificity_defined ? Cell::num(ms.mc_se_specificity)
                                                 : Cell::na());
            row.push_back(Cell::num(ms.n_used));
            row.push_back(Cell::num(ms.n_failed));
            if (ms.n_failed > 0 && note.empty())
                note = std::to_string(ms.n_failed) + " replicates failed and were excluded";
            row.push_back(Cell::str(note));
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

int cmd_simulate(const std::vector<int>& scenarios, int replicates,
                 const CommonOptions& opt, std::ostream& out, std::ostream& err) {
    const std::vector<Method> methods = resolve_methods(opt.methods);
    const EstimatorConfig cfg = build_estimator_config(opt);

    std::vector<ScenarioSummary> summaries;
    for (int id : scenarios) {
        const ScenarioSpec spec = ScenarioSpec::builtin(id);
        summaries.push_back(run_scenario(spec, methods, replicates,
                                         derive_seed(opt.seed, {static_cast<std::uint64_t>(id)}),
                                         opt.workers, cfg));
    }

    nlohmann::json manifest = manifest_common("simulate", opt);
    manifest["config"]["scenarios"] = scenarios;
    manifest["config"]["replicates"] = replicates;
    manifest["config"]["n"] = 600;
    manifest["config"]["m"] = 300;
    emit(summary_table(summaries), manifest, opt, out, err);
    return 0;
}

int cmd_motivating(int replicates, double noise_sd, const CommonOptions& opt,
                   std::ostream& out, std::ostream& err) {
    const MotivatingStudyResult result =
        run_motivating_study(replicates, opt.seed, noise_sd, opt.workers);

    Table table;
    table.columns = {"covariate_distribution", "data_model", "fitted_model",
                     "truth",                  "mse",        "mc_se",
                     "note"};
    for (int d = 0; d < 2; ++d) {
        for (int g = 0; g < 3; ++g) {
            for (int model = 0; model < 3; ++model) {
                const auto& cell = result.cells[d][g][model];
                std::vector<Cell> row;
                row.push_back(Cell::str(MotivatingStudyResult::distribution_label(d)));
                row.push_back(Cell::str(MotivatingStudyResult::model_label(g)));
                row.push_back(Cell::str(MotivatingStudyResult::model_label(model)));
                row.push_back(Cell::num(result.truth[d][g]));
                row.push_back(Cell::num(cell.mse));
                row.push_back(Cell::num(cell.mc_se));
                row.push_back(Cell::str(""));
                table.rows.push_back(std::move(row));
            }
        }
    }

    nlohmann::json manifest = manifest_common("motivating-study", opt);
    manifest["config"]["replicates"] = replicates;
    manifest["config"]["noise_sd"] = noise_sd;
    manifest["config"]["n"] = 300;
    manifest["config"]["m"] = 900;
    emit(table, manifest, opt, out, err);
    return 0;
}

int cmd_analyze(const std::string& exp_path, const std::string& tgt_path, bool allow_extra,
                const CommonOptions& opt, std::ostream& out, std::ostream& err) {
    const ExperimentalSample exp = ingest_experimental_csv(exp_path, allow_extra);
    const TargetSample tgt = ingest_target_csv(tgt_path, allow_extra);
    validate_pair(exp, tgt);

    const std::vector<Method> methods = resolve_methods(opt.methods);
    EstimatorConfig cfg = build_estimator_config(opt);
    cfg.cv.seed = derive_seed(opt.seed, {0xceedu});

    Table table;
    table.columns = {"method",      "estimate",             "ci_lower",
                     "ci_upper",    "n_bootstrap",          "selected_interactions",
                     "selected_main_effects", "note"};

    const auto results = run_methods(methods, exp, tgt, cfg);
    for (std::size_t k = 0; k < methods.size(); ++k) {
        const Method method = methods[k];
        const EstimatorResult& res = results[k];

        std::string note = res.estimate.note;
        Cell lo = Cell::na(), hi = Cell::na();
        int n_boot = 0;
        if (opt.bootstrap >= 2) {
            TateEstimator fn = [&](const ExperimentalSample& e, const TargetSample& t,
                                   std::uint64_t s) {
                EstimatorConfig boot_cfg = cfg;
                boot_cfg.cv.seed = s;
                return run_method(method, e, t, boot_cfg).estimate.point;
            };
            const auto ci =
                bootstrap_ci(fn, exp, tgt, opt.bootstrap,
                             derive_seed(opt.seed, {0xb0u, static_cast<std::uint64_t>(k)}));
            lo = Cell::num(ci.first);
            hi = Cell::num(ci.second);
            n_boot = opt.bootstrap;
        } else if (note.empty()) {
            note = "bootstrap disabled";
        }

        std::vector<Cell> row;
        row.push_back(Cell::str(method_name(method)));
        row.push_back(Cell::num(res.estimate.point));
        row.push_back(std::move(lo));
        row.push_back(std::move(hi));
        row.push_back(Cell::num(n_boot));
        row.push_back(selection_cell(res.selected_interactions));
        row.push_back(selection_cell(res.selected_main_effects));
        row.push_back(Cell::str(note));
        table.rows.push_back(std::move(row));
    }

    nlohmann::json manifest = manifest_common("analyze", opt);
    manifest["config"]["experimental"] = exp_path;
    manifest["config"]["target"] = tgt_path;
    manifest["config"]["allow_extra"] = allow_extra;
    manifest["config"]["n"] = exp.n();
    manifest["config"]["m"] = tgt.m();
    manifest["config"]["p"] = exp.p();
    manifest["config"]["weighted"] = tgt.raw_weights.has_value();
    emit(table, manifest, opt, out, err);
    return 0;
}

int cmd_validate(std::uint64_t seed, std::ostream& out) {
    const auto checks = run_validation_suite(seed);
    bool all_ok = true;
    for (const auto& check : checks) {
        out << (check.passed ? "PASS " : "FAIL ") << check.name;
        if (!check.passed && !check.detail.empty()) out << ": " << check.detail;
        out << "\n";
        all_ok = all_ok && check.passed;
    }
    out << (all_ok ? "validation passed" : "validation FAILED") << " (" << checks.size()
        << " checks)\n";
    return all_ok ? 0 : 1;
}

void add_common_flags(CLI::App* cmd, CommonOptions& opt, bool with_bootstrap) {
    cmd->add_option("--seed", opt.seed, "RNG seed")->capture_default_str();
    cmd->add_option("--workers", opt.workers, "worker threads (results do not depend on this)")
        ->capture_default_str();
    cmd->add_option("--format", opt.format, "output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    cmd->add_option("--out,-o", opt.out_path,
                    "output file (a .manifest.json sidecar is written next to it); "
                    "omit for a rounded table on stdout");
    cmd->add_option("--methods", opt.methods,
                    "comma-separated methods (default: all six)")
        ->delimiter(',');
    cmd->add_option("--folds", opt.folds, "cross-validation folds")->capture_default_str();
    cmd->add_option("--lambda-count", opt.lambda_count, "penalty grid size")
        ->capture_default_str();
    cmd->add_option("--lambda-min-ratio", opt.lambda_min_ratio,
                    "smallest grid value as a fraction of lambda_max")
        ->capture_default_str();
    cmd->add_flag("--literal-v", opt.literal_v,
                  "use the interaction full-model coefficient for every penalty weight");
    cmd->add_option("--selection-loss", opt.selection_loss,
                    "selection loss: bernoulli or pm2")
        ->check(CLI::IsMember({"bernoulli", "pm2"}))
        ->capture_default_str();
    cmd->add_option("--scaling", opt.scaling, "covariate scaling: experimental or pooled")
        ->check(CLI::IsMember({"experimental", "pooled"}))
        ->capture_default_str();
    if (with_bootstrap) {
        cmd->add_option("--bootstrap", opt.bootstrap,
                        "bootstrap replicates for percentile CIs (0 disables)")
            ->capture_default_str();
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Penalized-regression toolkit for generalizing randomized-trial "
                 "treatment effects to a target population"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    CommonOptions opt;
    opt.workers = env_default_workers();

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run built-in Monte Carlo scenarios");
    std::vector<int> scenarios;
    int replicates = 1000;
    simulate->add_option("--scenario,--scenarios", scenarios, "scenario ids (1-8)")
        ->delimiter(',')
        ->required();
    simulate->add_option("--replicates", replicates, "Monte Carlo replicates")
        ->capture_default_str();
    add_common_flags(simulate, opt, false);

    // motivating-study
    auto* motivating =
        app.add_subcommand("motivating-study", "three nested models on six generative settings");
    int mot_replicates = 1000;
    double mot_noise_sd = 1.5;
    motivating->add_option("--replicates", mot_replicates, "Monte Carlo replicates")
        ->capture_default_str();
    motivating->add_option("--noise-sd", mot_noise_sd, "outcome noise SD")
        ->capture_default_str();
    add_common_flags(motivating, opt, false);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "estimate the target-population effect from CSV data");
    std::string exp_path, tgt_path;
    bool allow_extra = false;
    analyze->add_option("--experimental", exp_path, "experimental sample CSV (y,a,x1..xp)")
        ->required();
    analyze->add_option("--target", tgt_path, "target sample CSV (x1..xp[,weight])")
        ->required();
    analyze->add_flag("--allow-extra", allow_extra, "ignore unknown columns");
    add_common_flags(analyze, opt, true);

    // validate
    auto* validate_cmd = app.add_subcommand("validate", "run the invariant and oracle checks");
    std::uint64_t validate_seed = 17;
    validate_cmd->add_option("--seed", validate_seed, "fixture seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (simulate->parsed()) {
            for (int id : scenarios) {
                if (id < 1 || id > 8)
                    throw std::invalid_argument("unknown scenario " + std::to_string(id) +
                                                " (built-in scenarios are 1-8)");
            }
            return cmd_simulate(scenarios, replicates, opt, out, err);
        }
        if (motivating->parsed())
            return cmd_motivating(mot_replicates, mot_noise_sd, opt, out, err);
        if (analyze->parsed())
            return cmd_analyze(exp_path, tgt_path, allow_extra, opt, out, err);
        if (validate_cmd->parsed()) return cmd_validate(validate_seed, out);
        err << "error: no command given\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace glaves
