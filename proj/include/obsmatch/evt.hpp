#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "obsmatch/matching.hpp"

namespace obsmatch {

inline constexpr double kEulerGamma = 0.57721566490153286061;

// Gumbel law for maxima: F(x) = exp(-exp(-(x - location) / scale)).
struct GumbelParams {
    double location = 0.0;
    double scale = 1.0;
    long long n_samples = 0;
    double loglik = 0.0;
    int iterations = 0;
};

double gumbel_loglik(std::span<const double> data, double location, double scale);

// Method-of-moments estimate; also the MLE starting point.
GumbelParams fit_gumbel_moments(std::span<const double> data);

// Maximum likelihood. The scale solves the profile equation
//   scale = mean(x) - sum(x e^{-x/scale}) / sum(e^{-x/scale})
// by damped Newton (relative step tolerance 1e-10, at most 100 iterations);
// the location follows in closed form.
GumbelParams fit_gumbel(std::span<const double> data);

double dq_from_gumbel(const GumbelParams& params, int q);
double theta_from_gumbel(const GumbelParams& params, int q, long long block_size, double dq);

struct EIEstimate {
    std::vector<double> p_hat;
    double theta_hat = 1.0;      // clamped to [0, 1]
    double theta_hat_raw = 1.0;  // 1 - sum(p_hat), accumulated in ascending k
    double threshold_u = 0.0;
    long long exceedance_count = 0;
    int q = 0;
    bool low_exceedances = false;  // fewer than 100 exceedances
};

// Counts exceedance return patterns above the empirical `quantile` of the
// values: p_0 = P(Y_{i+1} > u | Y_i > u), p_k = P(first return after exactly
// k sub-threshold steps | Y_i > u).
EIEstimate estimate_ei(std::span<const double> values, double quantile, int K, int q = 0);
EIEstimate estimate_ei(const MatchSeries& series, double quantile, int K);
// Same with the threshold given directly.
EIEstimate estimate_ei_at(std::span<const double> values, double threshold, int K, int q = 0);

double hq_from_theta(double theta, int q);

struct SpectrumResult {
    int q = 0;
    double estimate_mean = 0.0;
    double estimate_std = 0.0;
    int run_count = 0;
    std::string kind;  // dq, theta_gumbel, theta_hat, hq, ...
    std::map<std::string, std::string> metadata;
};

// Mean and population standard deviation across runs.
SpectrumResult aggregate_runs(std::span<const double> estimates, std::map<std::string, std::string> metadata = {});

} // namespace obsmatch
