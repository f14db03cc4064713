#include "obsmatch/observables.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "obsmatch/error.hpp"

namespace obsmatch {

PiecewiseBranch PiecewiseBranch::affine(double lo, double hi, double slope, double intercept) {
    if (slope == 0.0) throw Error(ErrorCode::Model, "affine branch with zero slope");
    std::ostringstream label;
    label << slope << "*x+" << intercept << " on [" << lo << ',' << hi << ')';
    return {lo,
            hi,
            [slope, intercept](double x) { return slope * x + intercept; },
            [slope, intercept](double y) { return (y - intercept) / slope; },
            [slope](double) { return slope; },
            label.str()};
}

PiecewiseBranch PiecewiseBranch::monomial(double lo, double hi, double coef, double power) {
    if (coef == 0.0 || !(power > 0.0) || lo < 0.0) {
        throw Error(ErrorCode::Model, "monomial branch needs coef != 0, power > 0, domain in [0, inf)");
    }
    std::ostringstream label;
    label << coef << "*x^" << power << " on [" << lo << ',' << hi << ')';
    return {lo,
            hi,
            [coef, power](double x) { return coef * std::pow(x, power); },
            [coef, power](double y) { return std::pow(y / coef, 1.0 / power); },
            [coef, power](double x) { return coef * power * std::pow(x, power - 1.0); },
            label.str()};
}

int locate_branch(const std::vector<PiecewiseBranch>& branches, double x) noexcept {
    int last = -1;
    double last_hi = -1.0;
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const auto& b = branches[i];
        if (x >= b.lo && x < b.hi) return static_cast<int>(i);
        if (b.hi > last_hi) {
            last_hi = b.hi;
            last = static_cast<int>(i);
        }
    }
    return (last >= 0 && x == last_hi) ? last : -1;
}

void validate_branches(const std::vector<PiecewiseBranch>& branches) {
    if (branches.empty()) throw Error(ErrorCode::Model, "piecewise function without branches");
    std::vector<std::pair<double, double>> domains;
    for (const auto& b : branches) {
        if (!b.map || !b.inverse || !b.dmap) {
            throw Error(ErrorCode::Model, "branch '" + b.label + "' lacks map, inverse or derivative");
        }
        if (!(b.lo < b.hi)) throw Error(ErrorCode::Model, "branch '" + b.label + "' has an empty domain");
        domains.emplace_back(b.lo, b.hi);
    }
    std::sort(domains.begin(), domains.end());
    if (std::abs(domains.front().first) > 1e-12 || std::abs(domains.back().second - 1.0) > 1e-12) {
        throw Error(ErrorCode::Model, "branch domains must cover [0,1]");
    }
    for (std::size_t i = 1; i < domains.size(); ++i) {
        if (std::abs(domains[i].first - domains[i - 1].second) > 1e-12) {
            throw Error(ErrorCode::Model, "branch domains must partition [0,1] without gaps or overlaps");
        }
    }
    constexpr int kProbe = 64;
    for (const auto& b : branches) {
        for (int k = 0; k < kProbe; ++k) {
            const double x = b.lo + (b.hi - b.lo) * (k + 0.5) / kProbe;
            if (!(std::abs(b.dmap(x)) > 0.0)) {
                throw Error(ErrorCode::Model, "branch '" + b.label + "' has a vanishing derivative");
            }
            if (std::abs(b.inverse(b.map(x)) - x) > 1e-12) {
                throw Error(ErrorCode::Model, "branch '" + b.label + "' inverse does not invert map");
            }
        }
    }
}

Observable::Observable(std::string name, int in_dim, int out_dim, EvalFn eval, JacobianFn jacobian)
    : name_(std::move(name)),
      in_dim_(in_dim),
      out_dim_(out_dim),
      eval_(std::move(eval)),
      jacobian_(std::move(jacobian)) {
    if (in_dim_ < 1 || in_dim_ > 2 || out_dim_ < 1 || out_dim_ > 2) {
        throw Error(ErrorCode::InvalidArgument, "observable dimensions must be 1 or 2");
    }
}

Observable::Observable(std::string name, std::vector<PiecewiseBranch> branches)
    : name_(std::move(name)), in_dim_(1), out_dim_(1), branches_(std::move(branches)) {
    validate_branches(branches_);
}

Observable& Observable::with_singularity(std::function<bool(const Point&)> singular) {
    singular_ = std::move(singular);
    return *this;
}

std::optional<Point> Observable::try_evaluate(const Point& x) const noexcept {
    if (singular_ && singular_(x)) return std::nullopt;
    Point y;
    if (!branches_.empty()) {
        const int i = locate_branch(branches_, x[0]);
        if (i < 0) return std::nullopt;
        y = {branches_[static_cast<std::size_t>(i)].map(x[0]), 0.0};
    } else {
        y = eval_(x);
    }
    for (int k = 0; k < out_dim_; ++k) {
        if (!std::isfinite(y[static_cast<std::size_t>(k)])) return std::nullopt;
    }
    return y;
}

Point Observable::evaluate(const Point& x) const {
    if (auto y = try_evaluate(x)) return *y;
    std::ostringstream os;
    os.precision(17);
    os << "observable '" << name_ << "' is not finite at (" << x[0];
    if (in_dim_ == 2) os << ", " << x[1];
    os << ')';
    throw Error(ErrorCode::Evaluation, os.str());
}

Jacobian Observable::derivative(const Point& x) const {
    if (!branches_.empty()) {
        for (const auto& b : branches_) {
            const bool interior_lo = b.lo > 0.0 && std::abs(x[0] - b.lo) <= 1e-12;
            const bool interior_hi = b.hi < 1.0 && std::abs(x[0] - b.hi) <= 1e-12;
            if (interior_lo || interior_hi) {
                std::ostringstream os;
                os.precision(17);
                os << "observable '" << name_ << "': x = " << x[0] << " is the branch boundary "
                   << (interior_lo ? b.lo : b.hi) << " of '" << b.label << "'";
                throw Error(ErrorCode::Breakpoint, os.str());
            }
        }
        const int i = locate_branch(branches_, x[0]);
        if (i < 0) throw Error(ErrorCode::Evaluation, "observable '" + name_ + "': x outside [0,1]");
        return {{{branches_[static_cast<std::size_t>(i)].dmap(x[0]), 0.0}, {0.0, 0.0}}};
    }
    if (jacobian_) return jacobian_(x);
    return finite_difference(*this, x);
}

Jacobian finite_difference(const Observable& obs, const Point& x, double step) {
    Jacobian jac{};
    for (int c = 0; c < obs.in_dim(); ++c) {
        Point up = x, down = x;
        up[static_cast<std::size_t>(c)] += step;
        down[static_cast<std::size_t>(c)] -= step;
        const Point fu = obs.evaluate(up);
        const Point fd = obs.evaluate(down);
        for (int r = 0; r < obs.out_dim(); ++r) {
            jac[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
                (fu[static_cast<std::size_t>(r)] - fd[static_cast<std::size_t>(r)]) / (2.0 * step);
        }
    }
    return jac;
}

Point clamp_singular(const Point& x) noexcept {
    Point out = x;
    for (double& c : out) {
        if (std::abs(c) < kSingularityClamp) c = std::copysign(kSingularityClamp, c);
    }
    return out;
}

namespace {

bool near_zero_coordinate(const Point& p) {
    return std::abs(p[0]) < kSingularityClamp || std::abs(p[1]) < kSingularityClamp;
}

Observable identity(const std::string& name, int in_dim) {
    return Observable(
        name, in_dim, in_dim, [](const Point& p) { return p; },
        [in_dim](const Point&) {
            return in_dim == 1 ? Jacobian{{{1.0, 0.0}, {0.0, 0.0}}} : Jacobian{{{1.0, 0.0}, {0.0, 1.0}}};
        });
}

Observable oscillatory(const std::string& name) {
    Observable obs(
        name, 2, 2, [](const Point& p) { return Point{std::sin(1.0 / p[0]), std::cos(1.0 / p[1])}; },
        [](const Point& p) {
            return Jacobian{{{-std::cos(1.0 / p[0]) / (p[0] * p[0]), 0.0},
                             {0.0, std::sin(1.0 / p[1]) / (p[1] * p[1])}}};
        });
    obs.with_singularity(near_zero_coordinate);
    return obs;
}

Observable example_f() {
    return Observable("example_f", {PiecewiseBranch::affine(0.0, 0.5, 2.0, 0.0),
                                    PiecewiseBranch::affine(0.5, 1.0, -1.0, 1.5)});
}

Observable doubling_observable() {
    return Observable("doubling_map", {PiecewiseBranch::affine(0.0, 0.5, 2.0, 0.0),
                                       PiecewiseBranch::affine(0.5, 1.0, 2.0, -1.0)});
}

} // namespace

Observable make_linear(std::string name, const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.size() > 2) throw Error(ErrorCode::Validation, name + ": linear map needs 1 or 2 rows");
    const std::size_t cols = rows.front().size();
    if (cols < 1 || cols > 2) throw Error(ErrorCode::Validation, name + ": linear map needs 1 or 2 columns");
    Jacobian a{};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) throw Error(ErrorCode::Validation, name + ": ragged linear map");
        for (std::size_t c = 0; c < cols; ++c) a[r][c] = rows[r][c];
    }
    return Observable(
        std::move(name), static_cast<int>(cols), static_cast<int>(rows.size()),
        [a](const Point& p) {
            return Point{a[0][0] * p[0] + a[0][1] * p[1], a[1][0] * p[0] + a[1][1] * p[1]};
        },
        [a](const Point&) { return a; });
}

const std::vector<std::string>& catalog_names() {
    static const std::vector<std::string> names{
        "id",      "fig1_f1", "fig1_f2", "fig1_f3",   "fig1_f4",      "fig1_f5", "fig3_f1",  "fig3_f2",
        "fig3_f3", "fig3_f4", "fig3_f5", "mean",      "example_f",    "doubling_map", "proj_r1", "linear_r2"};
    return names;
}

Observable catalog(const std::string& name, int in_dim) {
    if (name == "id" || name == "fig1_f1" || name == "fig3_f1") {
        if (in_dim != 1 && in_dim != 2) throw Error(ErrorCode::InvalidArgument, "identity dimension must be 1 or 2");
        // On the interval the identity is a one-branch piecewise map, so the
        // analytic machinery applies to it.
        if (in_dim == 1) return Observable(name, {PiecewiseBranch::affine(0.0, 1.0, 1.0, 0.0)});
        return identity(name, in_dim);
    }
    if (name == "fig1_f2") {
        return Observable(
            name, 2, 2, [](const Point& p) { return Point{2.0 * p[0] + p[1], 2.0 * p[1]}; },
            [](const Point&) { return Jacobian{{{2.0, 1.0}, {0.0, 2.0}}}; });
    }
    if (name == "fig1_f3" || name == "fig3_f5") return oscillatory(name);
    if (name == "fig1_f4") {
        return Observable(
            name, 2, 2, [](const Point& p) { return Point{(p[0] - 0.5) * (p[0] - 0.5), 2.0 * p[1]}; },
            [](const Point& p) { return Jacobian{{{2.0 * (p[0] - 0.5), 0.0}, {0.0, 2.0}}}; });
    }
    if (name == "fig1_f5") {
        return Observable(
            name, 2, 2, [](const Point& p) { return Point{1.0, p[1] * p[1] + p[0]}; },
            [](const Point& p) { return Jacobian{{{0.0, 0.0}, {1.0, 2.0 * p[1]}}}; });
    }
    if (name == "fig3_f2") {
        return Observable(
            name, 2, 2, [](const Point& p) { return Point{100.0 * p[0] + p[1], 100.0 * p[1]}; },
            [](const Point&) { return Jacobian{{{100.0, 1.0}, {0.0, 100.0}}}; });
    }
    if (name == "fig3_f3") {
        return Observable(
            name, 2, 2, [](const Point& p) { return Point{p[0], 100.0 * p[1]}; },
            [](const Point&) { return Jacobian{{{1.0, 0.0}, {0.0, 100.0}}}; });
    }
    if (name == "fig3_f4") {
        return Observable(
            name, 2, 2, [](const Point& p) { return Point{p[0] * p[0], p[1] * p[1]}; },
            [](const Point& p) { return Jacobian{{{2.0 * p[0], 0.0}, {0.0, 2.0 * p[1]}}}; });
    }
    if (name == "mean") {
        return Observable(
            name, 2, 1, [](const Point& p) { return Point{0.5 * (p[0] + p[1]), 0.0}; },
            [](const Point&) { return Jacobian{{{0.5, 0.5}, {0.0, 0.0}}}; });
    }
    if (name == "example_f") return example_f();
    if (name == "doubling_map") return doubling_observable();
    // Fixed "generic" linear maps: entries chosen with no rational relation
    // to the gasket vertices.
    if (name == "proj_r1") return make_linear(name, {{std::cos(1.0), std::sin(1.0)}});
    if (name == "linear_r2") return make_linear(name, {{0.9, std::sqrt(0.2)}, {-std::sqrt(0.1), 1.2}});
    throw Error(ErrorCode::UnknownName, "unknown observable '" + name + "'");
}

} // namespace obsmatch
