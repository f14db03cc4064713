#include "obsmatch/evt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "obsmatch/error.hpp"

namespace obsmatch {

namespace {

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
};

Moments moments(std::span<const double> data) {
    Moments m;
    for (double x : data) m.mean += x;
    m.mean /= static_cast<double>(data.size());
    for (double x : data) m.variance += (x - m.mean) * (x - m.mean);
    m.variance /= static_cast<double>(data.size() - 1);
    return m;
}

void require_fit_input(std::span<const double> data) {
    if (data.size() < 50) {
        throw Error(ErrorCode::InvalidArgument,
                    "Gumbel fit needs at least 50 samples, got " + std::to_string(data.size()));
    }
    for (double x : data) {
        if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "Gumbel fit input is not finite");
    }
    const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    if (*lo == *hi) throw Error(ErrorCode::DegenerateSample, "Gumbel fit input is constant");
}

// Profile-likelihood pieces for shifted data c >= 0 at a given scale.
struct Profile {
    double g = 0.0;      // residual of the scale equation
    double slope = 0.0;  // dg/dscale
    double mean_w = 0.0;
};

Profile profile(std::span<const double> shifted, double mean_c, double scale) {
    double sw = 0.0, scw = 0.0, sc2w = 0.0;
    for (double c : shifted) {
        const double w = std::exp(-c / scale);
        sw += w;
        scw += c * w;
        sc2w += c * c * w;
    }
    const double a = scw / sw;
    const double var_w = std::max(sc2w / sw - a * a, 0.0);
    return {scale - mean_c + a, 1.0 + var_w / (scale * scale), sw / static_cast<double>(shifted.size())};
}

} // namespace

double gumbel_loglik(std::span<const double> data, double location, double scale) {
    double ll = 0.0;
    for (double x : data) {
        const double z = (x - location) / scale;
        ll += -std::log(scale) - z - std::exp(-z);
    }
    return ll;
}

GumbelParams fit_gumbel_moments(std::span<const double> data) {
    require_fit_input(data);
    const Moments m = moments(data);
    GumbelParams p;
    p.scale = std::sqrt(m.variance) * std::sqrt(6.0) / std::numbers::pi;
    p.location = m.mean - kEulerGamma * p.scale;
    p.n_samples = static_cast<long long>(data.size());
    p.loglik = gumbel_loglik(data, p.location, p.scale);
    return p;
}

GumbelParams fit_gumbel(std::span<const double> data) {
    const GumbelParams start = fit_gumbel_moments(data);

    const double shift = *std::min_element(data.begin(), data.end());
    std::vector<double> shifted(data.size());
    double mean_c = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        shifted[i] = data[i] - shift;
        mean_c += shifted[i];
    }
    mean_c /= static_cast<double>(data.size());

    constexpr int kMaxIterations = 100;
    constexpr double kTolerance = 1e-10;
    double scale = start.scale;
    std::vector<double> trace{scale};
    Profile cur = profile(shifted, mean_c, scale);
    bool converged = false;
    int iterations = 0;
    for (; iterations < kMaxIterations && !converged; ++iterations) {
        double step = cur.g / cur.slope;
        double next = scale - step;
        Profile trial{};
        for (int halving = 0;; ++halving) {
            if (next > 0.0) {
                trial = profile(shifted, mean_c, next);
                if (std::abs(trial.g) <= std::abs(cur.g) || halving >= 40) break;
            }
            step *= 0.5;
            next = scale - step;
        }
        converged = std::abs(next - scale) <= kTolerance * next;
        scale = next;
        cur = trial;
        trace.push_back(scale);
    }
    if (!converged || !std::isfinite(scale) || !(scale > 0.0)) {
        std::ostringstream os;
        os << "Gumbel MLE did not converge in " << kMaxIterations << " iterations (last scale "
           << scale << ")";
        throw FitFailureError(os.str(), std::move(trace));
    }

    GumbelParams p;
    p.scale = scale;
    p.location = shift - scale * std::log(cur.mean_w);
    p.n_samples = static_cast<long long>(data.size());
    p.loglik = gumbel_loglik(data, p.location, p.scale);
    p.iterations = iterations;
    return p;
}

double dq_from_gumbel(const GumbelParams& params, int q) {
    if (q < 2) throw Error(ErrorCode::InvalidArgument, "q must be >= 2");
    if (!(params.scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "Gumbel scale must be > 0");
    return 1.0 / (params.scale * (q - 1));
}

double theta_from_gumbel(const GumbelParams& params, int q, long long block_size, double dq) {
    if (!(dq > 0.0)) throw Error(ErrorCode::InvalidArgument, "dq must be > 0");
    if (q < 2) throw Error(ErrorCode::InvalidArgument, "q must be >= 2");
    if (block_size < 1) throw Error(ErrorCode::InvalidArgument, "block_size must be >= 1");
    const double theta =
        std::exp(params.location * dq * (q - 1) - std::log(static_cast<double>(block_size)));
    return std::clamp(theta, std::numeric_limits<double>::min(), 1.0);
}

EIEstimate estimate_ei_at(std::span<const double> values, double threshold, int K, int q) {
    if (K < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
    EIEstimate est;
    est.q = q;
    est.threshold_u = threshold;
    est.p_hat.assign(static_cast<std::size_t>(K), 0.0);

    const auto n = static_cast<long long>(values.size());
    const long long last = n - K - 2;  // every pattern must fit inside the series
    std::vector<long long> counts(static_cast<std::size_t>(K), 0);
    for (long long i = 0; i <= last; ++i) {
        if (!(values[static_cast<std::size_t>(i)] > threshold)) continue;
        ++est.exceedance_count;
        for (int j = 1; j <= K; ++j) {
            if (values[static_cast<std::size_t>(i + j)] > threshold) {
                ++counts[static_cast<std::size_t>(j - 1)];
                break;
            }
        }
    }
    if (est.exceedance_count == 0) {
        throw Error(ErrorCode::InsufficientTail, "no exceedances of the threshold");
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        est.p_hat[k] = static_cast<double>(counts[k]) / static_cast<double>(est.exceedance_count);
        sum += est.p_hat[k];
    }
    est.theta_hat_raw = 1.0 - sum;
    est.theta_hat = std::clamp(est.theta_hat_raw, 0.0, 1.0);
    est.low_exceedances = est.exceedance_count < 100;
    return est;
}

EIEstimate estimate_ei(std::span<const double> values, double quantile, int K, int q) {
    if (K < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
    return estimate_ei_at(values, threshold_for_quantile(values, quantile), K, q);
}

EIEstimate estimate_ei(const MatchSeries& series, double quantile, int K) {
    return estimate_ei(series.values, quantile, K, series.config.q);
}

double hq_from_theta(double theta, int q) {
    if (q < 2) throw Error(ErrorCode::InvalidArgument, "q must be >= 2");
    if (theta == 1.0) {
        throw Error(ErrorCode::InfiniteH, "theta = 1: every cluster probability vanished, H_q is infinite");
    }
    if (!(theta >= 0.0 && theta < 1.0)) throw Error(ErrorCode::InvalidArgument, "theta must be in [0,1)");
    return std::log(1.0 - theta) / (1.0 - q);
}

SpectrumResult aggregate_runs(std::span<const double> estimates, std::map<std::string, std::string> metadata) {
    if (estimates.empty()) throw Error(ErrorCode::InvalidArgument, "aggregate_runs needs at least one estimate");
    SpectrumResult r;
    r.run_count = static_cast<int>(estimates.size());
    for (double e : estimates) r.estimate_mean += e;
    r.estimate_mean /= static_cast<double>(estimates.size());
    double ss = 0.0;
    for (double e : estimates) ss += (e - r.estimate_mean) * (e - r.estimate_mean);
    r.estimate_std = std::sqrt(ss / static_cast<double>(estimates.size()));
    r.metadata = std::move(metadata);
    return r;
}

} // namespace obsmatch
