#include "obsmatch/matching.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "obsmatch/error.hpp"

namespace obsmatch {

const char* to_string(Metric metric) noexcept {
    return metric == Metric::Sup ? "sup" : "euclidean";
}

Metric parse_metric(const std::string& text) {
    if (text == "sup") return Metric::Sup;
    if (text == "euclidean") return Metric::Euclidean;
    throw Error(ErrorCode::Validation, "metric must be 'sup' or 'euclidean', got '" + text + "'");
}

void MatchConfig::validate() const {
    if (q < 2) throw Error(ErrorCode::Validation, "q must be >= 2");
    if (n_total < 1) throw Error(ErrorCode::Validation, "n_total must be >= 1");
    if (block_size < 1) throw Error(ErrorCode::Validation, "block_size must be >= 1");
    if (!(floor > 0.0)) throw Error(ErrorCode::Validation, "floor must be > 0");
}

double distance(const Point& a, const Point& b, int dim, Metric metric) noexcept {
    const double d0 = std::abs(a[0] - b[0]);
    if (dim == 1) return d0;
    const double d1 = std::abs(a[1] - b[1]);
    return metric == Metric::Sup ? std::max(d0, d1) : std::hypot(d0, d1);
}

double match_value(std::span<const Point> observations, int dim, Metric metric, double floor) noexcept {
    double worst = 0.0;
    for (std::size_t j = 1; j < observations.size(); ++j) {
        worst = std::max(worst, distance(observations[0], observations[j], dim, metric));
    }
    return -std::log(std::max(worst, floor));
}

MatchSeries y_process(const MapSystem& system, const Observable& obs, const MatchConfig& cfg,
                      const SeedPlan& seeds) {
    std::vector<Rng> streams;
    streams.reserve(static_cast<std::size_t>(std::max(cfg.q, 0)));
    for (int j = 0; j < cfg.q; ++j) {
        streams.push_back(stream_for(seeds.master_seed, seeds.run, static_cast<std::uint64_t>(j)));
    }
    return y_process(system, obs, cfg, std::move(streams), seeds);
}

MatchSeries y_process(const MapSystem& system, const Observable& obs, const MatchConfig& cfg,
                      std::vector<Rng> streams, const SeedPlan& seeds) {
    cfg.validate();
    if (obs.in_dim() != system.dim()) {
        throw Error(ErrorCode::Validation, "observable '" + obs.name() + "' expects dimension " +
                                               std::to_string(obs.in_dim()) + " but system '" +
                                               system.name() + "' has dimension " +
                                               std::to_string(system.dim()));
    }
    if (streams.size() != static_cast<std::size_t>(cfg.q)) {
        throw Error(ErrorCode::InvalidArgument, "need exactly q generators");
    }

    std::vector<Orbit> orbits;
    orbits.reserve(streams.size());
    for (const Rng& rng : streams) orbits.emplace_back(system, rng);

    MatchSeries series;
    series.config = cfg;
    series.seeds = seeds;
    series.values.resize(static_cast<std::size_t>(cfg.n_total));

    const auto budget = static_cast<long long>(1e-6 * static_cast<double>(cfg.n_total));
    std::vector<Point> observed(orbits.size());
    const int m = obs.out_dim();

    for (long long i = 0; i < cfg.n_total; ++i) {
        bool clamped = false;
        for (std::size_t j = 0; j < orbits.size(); ++j) {
            if (i > 0) orbits[j].advance();
            if (auto y = obs.try_evaluate(orbits[j].point())) {
                observed[j] = *y;
            } else {
                clamped = true;
                observed[j] = obs.evaluate(clamp_singular(orbits[j].point()));
            }
        }
        if (clamped && ++series.clamped_steps > budget) {
            throw Error(ErrorCode::DataQuality,
                        "observable '" + obs.name() + "' failed to evaluate on more than 1e-6 of steps");
        }
        series.values[static_cast<std::size_t>(i)] = match_value(observed, m, cfg.metric, cfg.floor);
    }
    return series;
}

std::vector<double> block_maxima(std::span<const double> values, long long block_size) {
    if (block_size < 1) throw Error(ErrorCode::InvalidArgument, "block_size must be >= 1");
    const auto blocks = static_cast<std::size_t>(values.size() / static_cast<std::size_t>(block_size));
    std::vector<double> out(blocks);
    const auto bs = static_cast<std::size_t>(block_size);
    for (std::size_t b = 0; b < blocks; ++b) {
        out[b] = *std::max_element(values.begin() + static_cast<std::ptrdiff_t>(b * bs),
                                   values.begin() + static_cast<std::ptrdiff_t>((b + 1) * bs));
    }
    return out;
}

std::vector<double> block_maxima(const MatchSeries& series) {
    if (series.values.size() < static_cast<std::size_t>(series.config.block_size)) {
        throw Error(ErrorCode::InvalidArgument, "series shorter than one block");
    }
    return block_maxima(series.values, series.config.block_size);
}

double threshold_for_quantile(std::span<const double> values, double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile level must be in (0,1)");
    if (static_cast<double>(values.size()) * (1.0 - p) < 1.0 - 1e-9) {
        throw Error(ErrorCode::InsufficientTail,
                    "need at least 1/(1-p) samples for the requested quantile, have " +
                        std::to_string(values.size()));
    }
    std::vector<double> work(values.begin(), values.end());
    const auto k = static_cast<std::size_t>(std::floor(p * static_cast<double>(work.size() - 1)));
    std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(k), work.end());
    return work[k];
}

double threshold_for_quantile(const MatchSeries& series, double p) {
    return threshold_for_quantile(series.values, p);
}

double u_n_schedule(double n, double s, double dq, int q) {
    if (!(dq > 0.0)) throw Error(ErrorCode::InvalidArgument, "dq must be > 0");
    if (q < 2) throw Error(ErrorCode::InvalidArgument, "q must be >= 2");
    if (!(n >= 1.0)) throw Error(ErrorCode::InvalidArgument, "n must be >= 1");
    return (std::log(n) + s) / (dq * (q - 1));
}

namespace {

constexpr char kMagic[8] = {'O', 'B', 'S', 'M', 'A', 'T', 'C', 'H'};

template <class T>
void put_le(std::ofstream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::ifstream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

} // namespace

void dump_series(std::span<const double> values, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    put_le<std::uint32_t>(out, kSeriesDumpVersion);
    put_le<std::uint64_t>(out, values.size());
    for (double v : values) put_le<double>(out, v);
    if (!out) throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

std::vector<double> load_series(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw Error(ErrorCode::Io, "'" + path + "' is not a series dump");
    }
    const auto version = get_le<std::uint32_t>(in);
    if (version != kSeriesDumpVersion) {
        throw Error(ErrorCode::Io, "'" + path + "': unsupported dump version " + std::to_string(version));
    }
    const auto length = get_le<std::uint64_t>(in);
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(length));
    for (std::uint64_t i = 0; i < length; ++i) values.push_back(get_le<double>(in));
    if (!in) throw Error(ErrorCode::Io, "'" + path + "' is truncated");
    return values;
}

} // namespace obsmatch
