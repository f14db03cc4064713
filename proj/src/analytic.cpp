#include "obsmatch/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "obsmatch/error.hpp"
#include "obsmatch/rng.hpp"

namespace obsmatch {

namespace {

constexpr double kDomainTolerance = 1e-12;

void append_unique(std::vector<double>& out, double x) {
    if (x > 0.0 && x < 1.0) out.push_back(x);
}

struct PieceSignature {
    int f_branch;
    int t_branch;
    int ft_branch;
    std::size_t preimage_count;

    bool operator==(const PieceSignature&) const = default;
};

} // namespace

void IntervalModel::validate() const {
    validate_branches(map_branches);
    validate_branches(obs_branches);
    constexpr int kProbe = 64;
    for (const auto& b : map_branches) {
        for (int k = 0; k < kProbe; ++k) {
            const double x = b.lo + (b.hi - b.lo) * (k + 0.5) / kProbe;
            if (!(std::abs(b.dmap(x)) > 1.0)) {
                throw Error(ErrorCode::Model, "map branch '" + b.label + "' is not expanding");
            }
        }
    }
    constexpr int kCells = 100000;
    double mass = 0.0;
    for (int k = 0; k < kCells; ++k) {
        const double h = density((k + 0.5) / kCells);
        if (!(h >= 0.0)) throw Error(ErrorCode::Model, "density is negative or not finite");
        mass += h / kCells;
    }
    if (std::abs(mass - 1.0) > 1e-6) throw Error(ErrorCode::Model, "density does not integrate to 1");
}

IntervalModel doubling_model(std::vector<PiecewiseBranch> obs_branches) {
    IntervalModel model;
    model.map_branches = {PiecewiseBranch::affine(0.0, 0.5, 2.0, 0.0), PiecewiseBranch::affine(0.5, 1.0, 2.0, -1.0)};
    model.obs_branches = std::move(obs_branches);
    return model;
}

IntervalModel example_model() {
    return doubling_model({PiecewiseBranch::affine(0.0, 0.5, 2.0, 0.0), PiecewiseBranch::affine(0.5, 1.0, -1.0, 1.5)});
}

double eval_piecewise(const std::vector<PiecewiseBranch>& branches, double x) {
    const int i = locate_branch(branches, x);
    if (i < 0) {
        std::ostringstream os;
        os.precision(17);
        os << "x = " << x << " outside the branch partition";
        throw Error(ErrorCode::Model, os.str());
    }
    return branches[static_cast<std::size_t>(i)].map(x);
}

std::vector<double> preimages(const std::vector<PiecewiseBranch>& obs_branches, double y) {
    std::vector<double> out;
    for (const auto& b : obs_branches) {
        double x = b.inverse(y);
        if (!std::isfinite(x) || !b.contains(x, kDomainTolerance)) continue;
        x = std::clamp(x, b.lo, b.hi);
        // The closed domain admits the right endpoint, which may belong to
        // the next branch; keep it only if f really takes the value y there.
        const int owner = locate_branch(obs_branches, x);
        if (owner < 0) continue;
        if (std::abs(obs_branches[static_cast<std::size_t>(owner)].map(x) - y) > 1e-9 * std::max(1.0, std::abs(y))) {
            continue;
        }
        out.push_back(x);
    }
    std::sort(out.begin(), out.end());
    std::vector<double> merged;
    for (double x : out) {
        if (merged.empty() || x - merged.back() > kDomainTolerance) merged.push_back(x);
    }
    return merged;
}

double p0q_interval(const IntervalModel& model, int q, int resolution) {
    if (q < 2) throw Error(ErrorCode::InvalidArgument, "q must be >= 2");
    if (resolution < 1) throw Error(ErrorCode::InvalidArgument, "resolution must be >= 1");
    model.validate();
    const auto& fb = model.obs_branches;
    const auto& tb = model.map_branches;

    std::vector<double> cuts{0.0, 1.0};
    std::vector<double> f_ends;
    for (const auto& b : fb) {
        append_unique(cuts, b.lo);
        append_unique(cuts, b.hi);
        f_ends.push_back(b.lo);
        f_ends.push_back(b.hi);
    }
    for (const auto& b : tb) {
        append_unique(cuts, b.lo);
        append_unique(cuts, b.hi);
        // f o T breaks where T lands on a breakpoint of f.
        for (double e : f_ends) {
            const double x = b.inverse(e);
            if (std::isfinite(x) && b.contains(x)) append_unique(cuts, x);
        }
    }
    // The number of preimages of f(x) changes where f(x) crosses the value of
    // f at a branch end.
    for (const auto& b : fb) {
        for (double end : {b.lo, b.hi}) {
            const double level = b.map(end);
            for (const auto& c : fb) {
                const double x = c.inverse(level);
                if (std::isfinite(x) && c.contains(x)) append_unique(cuts, x);
            }
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double a, double b) { return b - a <= 1e-14; }),
               cuts.end());

    const double qm1 = static_cast<double>(q - 1);
    double numerator = 0.0;
    double denominator = 0.0;
    for (std::size_t piece = 0; piece + 1 < cuts.size(); ++piece) {
        const double a = cuts[piece];
        const double width = (cuts[piece + 1] - a) / resolution;
        PieceSignature first{};
        double piece_num = 0.0, piece_den = 0.0;
        for (int cell = 0; cell < resolution; ++cell) {
            const double x = a + (cell + 0.5) * width;
            const int fi = locate_branch(fb, x);
            const int ti = locate_branch(tb, x);
            if (fi < 0 || ti < 0) throw Error(ErrorCode::Model, "branches do not cover [0,1]");
            const auto& tbr = tb[static_cast<std::size_t>(ti)];
            const double tx = tbr.map(x);
            const int fti = locate_branch(fb, tx);
            if (fti < 0) throw Error(ErrorCode::Model, "T maps outside the domain of f");
            const auto pre = preimages(fb, fb[static_cast<std::size_t>(fi)].map(x));

            const PieceSignature sig{fi, ti, fti, pre.size()};
            if (cell == 0) {
                first = sig;
            } else if (!(sig == first)) {
                std::ostringstream os;
                os.precision(17);
                os << "branch structure changes inside [" << a << ", " << cuts[piece + 1]
                   << "]; a breakpoint was missed (non-monotone piece?)";
                throw Error(ErrorCode::Model, os.str());
            }

            const double h = model.density(x);
            const double df = std::abs(fb[static_cast<std::size_t>(fi)].dmap(x));
            const double dft = std::abs(fb[static_cast<std::size_t>(fti)].dmap(tx) * tbr.dmap(x));
            piece_num += std::pow(h, q) / std::pow(std::max(df, dft), qm1);

            double twins = 0.0;
            for (double y : pre) {
                const int yi = locate_branch(fb, y);
                twins += model.density(y) / std::abs(fb[static_cast<std::size_t>(yi)].dmap(y));
            }
            piece_den += std::pow(twins, qm1) * h;
        }
        numerator += piece_num * width;
        denominator += piece_den * width;
    }
    if (!(denominator > 0.0)) throw Error(ErrorCode::Model, "vanishing denominator");
    return numerator / denominator;
}

double theta_q_interval(const IntervalModel& model, int q, int resolution) {
    return 1.0 - p0q_interval(model, q, resolution);
}

double example_theta_closed_form(int q) {
    if (q < 2) throw Error(ErrorCode::InvalidArgument, "q must be >= 2");
    return 1.0 - (2.0 + std::pow(2.0, 2 - q)) / (1.0 + std::pow(3.0, q));
}

GenericityReport check_genericity(const IntervalModel& model, long long sample_count, int k_max,
                                  std::uint64_t seed) {
    if (sample_count < 1) throw Error(ErrorCode::InvalidArgument, "sample_count must be >= 1");
    if (k_max < 0) throw Error(ErrorCode::InvalidArgument, "k_max must be >= 0");
    validate_branches(model.map_branches);
    validate_branches(model.obs_branches);
    const auto& fb = model.obs_branches;
    const auto& tb = model.map_branches;

    // Rejection sampler for h.
    double h_max = 0.0;
    for (int k = 0; k < 10000; ++k) h_max = std::max(h_max, model.density((k + 0.5) / 10000));
    h_max *= 1.05;
    Rng rng(seed);
    auto draw = [&] {
        for (;;) {
            const double x = rng.uniform();
            if (rng.uniform() * h_max <= model.density(x)) return x;
        }
    };

    GenericityReport report;
    report.sample_count = sample_count;
    report.k_max = k_max;
    report.h2_violation_rate.assign(static_cast<std::size_t>(k_max), 0.0);
    report.h2_witnesses.resize(static_cast<std::size_t>(k_max));
    long long h1_count = 0;
    std::vector<long long> h2_count(static_cast<std::size_t>(k_max), 0);

    auto f = [&](double x) { return eval_piecewise(fb, x); };
    auto T = [&](double x) { return eval_piecewise(tb, x); };
    auto same = [](double a, double b) { return std::abs(a - b) <= kTwinTolerance; };

    std::vector<double> fx_orbit(static_cast<std::size_t>(k_max) + 2);
    for (long long s = 0; s < sample_count; ++s) {
        const double x = draw();
        double tx = x;
        for (auto& v : fx_orbit) {
            v = f(tx);
            tx = T(tx);
        }
        const auto twins = preimages(fb, fx_orbit[0]);

        bool h1_violated = false;
        std::vector<bool> hk_violated(static_cast<std::size_t>(k_max), false);
        for (double y : twins) {
            if (std::abs(y - x) <= kDomainTolerance) continue;
            double ty = T(y);
            const bool first_match = same(f(ty), fx_orbit[1]);
            if (first_match) {
                h1_violated = true;
                if (report.h1_witnesses.size() < 10) report.h1_witnesses.push_back({x, y});
                continue;
            }
            // y has differed at steps 1..k; check for a match at step k + 1.
            for (int k = 1; k <= k_max; ++k) {
                ty = T(ty);
                if (same(f(ty), fx_orbit[static_cast<std::size_t>(k) + 1])) {
                    const auto idx = static_cast<std::size_t>(k - 1);
                    hk_violated[idx] = true;
                    if (report.h2_witnesses[idx].size() < 10) report.h2_witnesses[idx].push_back({x, y});
                    break;
                }
            }
        }
        h1_count += h1_violated ? 1 : 0;
        for (std::size_t k = 0; k < hk_violated.size(); ++k) h2_count[k] += hk_violated[k] ? 1 : 0;
    }
    const auto n = static_cast<double>(sample_count);
    report.h1_violation_rate = static_cast<double>(h1_count) / n;
    for (std::size_t k = 0; k < h2_count.size(); ++k) {
        report.h2_violation_rate[k] = static_cast<double>(h2_count[k]) / n;
    }
    return report;
}

double dq_self_similar(std::span<const double> weights, double ratio, double q) {
    if (q == 1.0) throw Error(ErrorCode::UnsupportedOrder, "D_1 is not given by this formula (q = 1)");
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::InvalidArgument, "ratio must be in (0,1)");
    if (weights.empty()) throw Error(ErrorCode::InvalidArgument, "empty weight vector");
    double total = 0.0, moment = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw Error(ErrorCode::InvalidArgument, "weights must be nonnegative");
        total += w;
        if (w > 0.0) moment += std::pow(w, q);
    }
    if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorCode::InvalidArgument, "weights must sum to 1");
    return std::log(moment) / ((q - 1.0) * std::log(ratio));
}

double hk_projection(double dq, int m) {
    if (!(dq >= 0.0)) throw Error(ErrorCode::InvalidArgument, "dq must be >= 0");
    if (m < 1) throw Error(ErrorCode::InvalidArgument, "m must be >= 1");
    return std::min(dq, static_cast<double>(m));
}

} // namespace obsmatch
