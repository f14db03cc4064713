// Command-line front end; talks to the library only through the C interface.
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "obsmatch/obsmatch.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Flags {
    std::string out_dir = ".";
    int threads = -1;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

int fail(int code, om_status status, const std::string& context) {
    std::cerr << "obsmatch: " << context << ": " << om_status_string(status);
    const std::string detail = om_last_error();
    if (!detail.empty()) std::cerr << ": " << detail;
    std::cerr << '\n';
    return code;
}

// Anything that goes wrong before the run starts is an input problem.
int open_experiment(const std::string& path, bool manifest, const Flags& flags, om_experiment** exp) {
    const om_status st = manifest ? om_experiment_from_manifest(path.c_str(), exp) : om_experiment_load(path.c_str(), exp);
    if (st != OM_OK) return fail(kExitValidation, st, path);
    if (flags.seed) {
        const om_status s = om_experiment_set_seed(*exp, *flags.seed);
        if (s != OM_OK) return fail(kExitValidation, s, "--seed");
    }
    return kExitOk;
}

int execute(const std::string& path, bool manifest, const char* mode, const Flags& flags) {
    om_experiment* exp = nullptr;
    int rc = open_experiment(path, manifest, flags, &exp);
    if (rc == kExitOk && mode) {
        const om_status st = om_experiment_set_mode(exp, mode);
        if (st != OM_OK) rc = fail(kExitValidation, st, path);
    }
    if (rc == kExitOk) {
        const om_status st = om_experiment_run(exp, flags.out_dir.c_str(), flags.threads, flags.quiet ? 1 : 0);
        if (st == OM_ERR_VALIDATION) {
            rc = fail(kExitValidation, st, path);
        } else if (st != OM_OK) {
            rc = fail(kExitRuntime, st, path);
        }
    }
    if (rc == kExitOk && !flags.quiet) {
        char* csv = nullptr;
        if (om_experiment_results_csv(exp, &csv) == OM_OK) {
            std::cout << csv;
            om_string_free(csv);
        }
        const int failed = om_experiment_failed_cells(exp);
        if (failed > 0) std::cerr << "obsmatch: " << failed << " run(s) failed and were excluded (see manifest)\n";
        std::cerr << "results:  " << om_experiment_csv_path(exp) << '\n'
                  << "manifest: " << om_experiment_manifest_path(exp) << '\n';
    }
    om_experiment_destroy(exp);
    return rc;
}

int validate_only(const std::string& path, const Flags& flags) {
    om_experiment* exp = nullptr;
    int rc = open_experiment(path, false, flags, &exp);
    if (rc == kExitOk) {
        const om_status st = om_experiment_validate(exp);
        if (st != OM_OK) rc = fail(kExitValidation, st, path);
    }
    if (rc == kExitOk && !flags.quiet) {
        char* text = nullptr;
        if (om_experiment_config_json(exp, &text) == OM_OK) {
            std::cout << text << '\n';
            om_string_free(text);
        }
        std::cerr << path << ": ok\n";
    }
    om_experiment_destroy(exp);
    return rc;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Matching-process estimators for observed chaotic systems"};
    app.set_version_flag("--version", std::string(om_version()));
    app.require_subcommand(1);

    Flags flags;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out-dir", flags.out_dir, "Directory for results, manifest and reports");
        sub->add_option("--threads", flags.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
        sub->add_option("--seed", seed, "Override master_seed");
        sub->add_flag("--quiet", flags.quiet, "Only report errors");
    };

    std::string path;
    auto* run = app.add_subcommand("run", "Run an experiment config");
    auto* analytic = app.add_subcommand("analytic", "Evaluate the analytic oracles of a config");
    auto* genericity = app.add_subcommand("genericity", "Check the twin conditions for a config");
    auto* validate = app.add_subcommand("validate", "Validate a config and print it normalized");
    auto* replay = app.add_subcommand("replay", "Re-run the config recorded in a manifest");
    for (auto* sub : {run, analytic, genericity, validate}) {
        sub->add_option("config", path, "Experiment config (JSON)")->required();
        add_common(sub);
    }
    replay->add_option("manifest", path, "Manifest written by a previous run")->required();
    add_common(replay);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    }
    for (auto* sub : {run, analytic, genericity, validate, replay}) {
        if (sub->parsed() && sub->count("--seed") > 0) flags.seed = seed;
    }

    if (validate->parsed()) return validate_only(path, flags);
    if (analytic->parsed()) return execute(path, false, "analytic", flags);
    if (genericity->parsed()) return execute(path, false, "genericity", flags);
    if (replay->parsed()) return execute(path, true, nullptr, flags);
    return execute(path, false, nullptr, flags);
}
