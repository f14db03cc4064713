#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "obsmatch/observables.hpp"

namespace obsmatch {

// Expanding interval map T with an observation f, both given by monotone
// branches, and the invariant density h of T.
struct IntervalModel {
    std::vector<PiecewiseBranch> map_branches;
    std::vector<PiecewiseBranch> obs_branches;
    std::function<double(double)> density = [](double) { return 1.0; };

    // |T'| > 1 and |f'| > 0 inside every branch, h normalized within 1e-6.
    void validate() const;
};

IntervalModel doubling_model(std::vector<PiecewiseBranch> obs_branches);
// Doubling map observed through the two-branch example observation
// f(x) = 2x on [0,1/2], 3/2 - x on (1/2,1].
IntervalModel example_model();

double eval_piecewise(const std::vector<PiecewiseBranch>& branches, double x);

// All x with f(x) = y, ascending, duplicates within 1e-12 merged.
std::vector<double> preimages(const std::vector<PiecewiseBranch>& obs_branches, double y);

inline constexpr int kDefaultResolution = 100000;

// Ratio of
//   int h^q / max(|f'|, |(f o T)'|)^(q-1) dx
// and
//   int (sum_{y in f^-1 f(x)} h(y) / |f'(y)|)^(q-1) h(x) dx,
// by composite midpoint quadrature on the pieces between consecutive
// breakpoints of f, T, f o T and of the preimage count of f(x).
double p0q_interval(const IntervalModel& model, int q, int resolution = kDefaultResolution);
double theta_q_interval(const IntervalModel& model, int q, int resolution = kDefaultResolution);

double example_theta_closed_form(int q);

struct Witness {
    double x = 0.0;
    double y = 0.0;
};

struct GenericityReport {
    long long sample_count = 0;
    int k_max = 0;
    double h1_violation_rate = 0.0;
    std::vector<Witness> h1_witnesses;  // at most 10
    // Index k-1 holds the rate for A_k.
    std::vector<double> h2_violation_rate;
    std::vector<std::vector<Witness>> h2_witnesses;
};

inline constexpr double kTwinTolerance = 1e-9;

GenericityReport check_genericity(const IntervalModel& model, long long sample_count, int k_max = 5,
                                  std::uint64_t seed = 0);

// log(sum w_i^q) / ((q - 1) log ratio) for a self-similar measure with
// a common contraction ratio.
double dq_self_similar(std::span<const double> weights, double ratio, double q);

double hk_projection(double dq, int m);

} // namespace obsmatch
