#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "obsmatch/analytic.hpp"
#include "obsmatch/dynamics.hpp"
#include "obsmatch/evt.hpp"
#include "obsmatch/matching.hpp"
#include "obsmatch/observables.hpp"

namespace obsmatch {

enum class Mode { EstimateDq, EstimateEi, Analytic, Genericity, All };

const char* to_string(Mode mode) noexcept;
Mode parse_mode(const std::string& text);

struct ExperimentConfig {
    std::string name = "experiment";
    std::string system = "doubling";
    std::map<std::string, double> system_params;
    // Catalog name, or an object with "linear" rows or piecewise "branches".
    // Kept as JSON text so it can be echoed verbatim into the manifest.
    std::string observable_json = "\"id\"";
    std::vector<int> q_list{2};
    long long n_total = 1000000;
    long long block_size = 50000;
    double quantile = 0.999;
    int K = 5;
    int runs = 10;
    std::uint64_t master_seed = 1;
    Metric metric = Metric::Sup;
    double floor = 1e-300;
    Mode mode = Mode::All;
    int threads = 0;  // 0: machine parallelism
    int resolution = kDefaultResolution;
    long long genericity_samples = 10000;
    int k_max = 5;
    std::string csv_path = "results.csv";
    std::string manifest_path = "manifest.json";
    std::string genericity_path = "genericity.json";
    std::string series_dir;  // empty: no raw series dumps

    // Throws Error(Validation) with the offending field path.
    void validate() const;

    MapSystem make_system() const;
    Observable make_observable() const;
    std::string observable_name() const;
    // Present for the doubling map observed through a piecewise observable.
    std::optional<IntervalModel> interval_model() const;
};

// Observable from its config form: a JSON string (catalog name) or object.
Observable parse_observable(const std::string& json_text, int in_dim);

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config, int indent = 2);

// One line of the results CSV.
struct CsvRow {
    std::string kind;
    std::string system;
    std::string observable;
    int q = 0;
    int run_count = 0;
    double mean = 0.0;
    double std = 0.0;
    long long n_total = 0;
    long long block_size = 0;
    double quantile = 0.0;
    int K = 0;
    std::uint64_t seed = 0;

    bool operator==(const CsvRow&) const = default;
};

inline constexpr const char* kCsvHeader =
    "kind,system,observable,q,run_count,mean,std,n_total,block_size,quantile,K,seed";

std::string format_csv(const std::vector<CsvRow>& rows, bool header = true);
std::vector<CsvRow> parse_csv(const std::string& text);
// Writes the header unless appending to a non-empty file.
void emit_results(const std::vector<CsvRow>& rows, const std::string& path, bool append = false);

struct CellOutcome {
    int q = 0;
    int run = 0;
    std::uint64_t stream_seed = 0;
    bool ok = true;
    std::string message;
    std::optional<double> dq;
    std::optional<double> theta_gumbel;
    std::optional<EIEstimate> ei;
};

struct RunOptions {
    std::string out_dir = ".";
    int threads = -1;  // negative: take the config value
    bool quiet = false;
    // Written into the manifest; tests pin it to make manifests comparable.
    bool record_timestamps = true;
};

struct RunSummary {
    std::vector<CsvRow> rows;
    std::vector<CellOutcome> cells;
    std::optional<GenericityReport> genericity;
    std::string csv_path;
    std::string manifest_path;
    double wall_seconds = 0.0;
};

// Simulation cell for (q, run): the series, then the estimators of the mode.
CellOutcome run_cell(const ExperimentConfig& config, const MapSystem& system, const Observable& obs,
                     int q, int run);

// Aggregates cells into CSV rows (sorted by q, then kind) plus analytic rows.
std::vector<CsvRow> summarize(const ExperimentConfig& config, const std::vector<CellOutcome>& cells);
std::vector<CsvRow> analytic_rows(const ExperimentConfig& config);

RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Reads the config echoed in a manifest.
ExperimentConfig config_from_manifest(const std::string& manifest_path);

std::string genericity_to_json(const GenericityReport& report, int indent = 2);

const char* version() noexcept;

} // namespace obsmatch
