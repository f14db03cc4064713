#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "obsmatch/dynamics.hpp"
#include "obsmatch/observables.hpp"

namespace obsmatch {

enum class Metric { Sup, Euclidean };

const char* to_string(Metric metric) noexcept;
Metric parse_metric(const std::string& text);

struct MatchConfig {
    int q = 2;
    long long n_total = 0;
    long long block_size = 50000;
    Metric metric = Metric::Sup;
    double floor = 1e-300;

    void validate() const;
};

// Trajectory j of run r draws from stream_for(master_seed, run, j).
struct SeedPlan {
    std::uint64_t master_seed = 0;
    std::uint64_t run = 0;

    std::uint64_t stream_seed() const noexcept { return master_seed ^ run; }
};

struct MatchSeries {
    std::vector<double> values;
    MatchConfig config;
    SeedPlan seeds;
    // Steps where a coordinate had to be clamped away from a singularity.
    long long clamped_steps = 0;
};

double distance(const Point& a, const Point& b, int dim, Metric metric) noexcept;

// -log of the largest distance between observations[0] and the others,
// with distances below `floor` clamped to `floor`.
double match_value(std::span<const Point> observations, int dim, Metric metric, double floor) noexcept;

MatchSeries y_process(const MapSystem& system, const Observable& obs, const MatchConfig& cfg,
                      const SeedPlan& seeds);
// Same, with caller-supplied generators (one per trajectory, reference first).
MatchSeries y_process(const MapSystem& system, const Observable& obs, const MatchConfig& cfg,
                      std::vector<Rng> streams, const SeedPlan& seeds = {});

// Maxima of consecutive disjoint blocks; a trailing partial block is dropped.
std::vector<double> block_maxima(std::span<const double> values, long long block_size);
std::vector<double> block_maxima(const MatchSeries& series);

// Empirical p-quantile: the order statistic at index floor(p * (n - 1)).
double threshold_for_quantile(std::span<const double> values, double p);
double threshold_for_quantile(const MatchSeries& series, double p);

// (log n + s) / (dq (q - 1)).
double u_n_schedule(double n, double s, double dq, int q);

// Raw dump: "OBSMATCH", u32 version, u64 length, then little-endian f64 values.
inline constexpr std::uint32_t kSeriesDumpVersion = 1;
void dump_series(std::span<const double> values, const std::string& path);
std::vector<double> load_series(const std::string& path);

} // namespace obsmatch
