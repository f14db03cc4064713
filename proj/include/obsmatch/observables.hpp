#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "obsmatch/dynamics.hpp"

namespace obsmatch {

using Jacobian = std::array<std::array<double, 2>, 2>;

// One strictly monotone C^1 piece of an interval function, defined on
// [lo, hi). The last piece of a partition of [0,1] also owns x = 1.
struct PiecewiseBranch {
    double lo = 0.0;
    double hi = 1.0;
    std::function<double(double)> map;
    std::function<double(double)> inverse;
    std::function<double(double)> dmap;
    std::string label;

    static PiecewiseBranch affine(double lo, double hi, double slope, double intercept);
    // coef * x^power, power > 0, on a domain inside [0, inf).
    static PiecewiseBranch monomial(double lo, double hi, double coef, double power);

    bool contains(double x, double tol = 0.0) const noexcept {
        return x >= lo - tol && x <= hi + tol;
    }
};

// Index of the branch owning x (half-open convention), or -1.
int locate_branch(const std::vector<PiecewiseBranch>& branches, double x) noexcept;

// Checks that domains partition [0,1], that inverse(map(x)) = x to 1e-12 and
// that |dmap| > 0 inside every piece. Throws Error(Model) otherwise.
void validate_branches(const std::vector<PiecewiseBranch>& branches);

class Observable {
public:
    using EvalFn = std::function<Point(const Point&)>;
    using JacobianFn = std::function<Jacobian(const Point&)>;

    Observable(std::string name, int in_dim, int out_dim, EvalFn eval, JacobianFn jacobian = {});
    // 1-D piecewise observable; evaluation and derivative come from the branches.
    Observable(std::string name, std::vector<PiecewiseBranch> branches);

    const std::string& name() const noexcept { return name_; }
    int in_dim() const noexcept { return in_dim_; }
    int out_dim() const noexcept { return out_dim_; }
    bool has_derivative() const noexcept { return static_cast<bool>(jacobian_) || !branches_.empty(); }
    const std::vector<PiecewiseBranch>& branches() const noexcept { return branches_; }

    // Throws Error(Evaluation) on a non-finite result or at a coordinate
    // singularity (|x| < 1e-300 for the 1/x observables).
    Point evaluate(const Point& x) const;
    std::optional<Point> try_evaluate(const Point& x) const noexcept;

    // Analytic Jacobian when available, central difference (step 1e-6)
    // otherwise. For piecewise observables throws Error(Breakpoint) at a
    // branch boundary.
    Jacobian derivative(const Point& x) const;
    double derivative(double x) const { return derivative(Point{x, 0.0})[0][0]; }

    Observable& with_singularity(std::function<bool(const Point&)> singular);

private:
    std::string name_;
    int in_dim_;
    int out_dim_;
    EvalFn eval_;
    JacobianFn jacobian_;
    std::vector<PiecewiseBranch> branches_;
    std::function<bool(const Point&)> singular_;
};

inline constexpr double kFiniteDifferenceStep = 1e-6;
inline constexpr double kSingularityClamp = 1e-300;

Jacobian finite_difference(const Observable& obs, const Point& x, double step = kFiniteDifferenceStep);

// Replaces every coordinate with |c| < 1e-300 by +-1e-300.
Point clamp_singular(const Point& x) noexcept;

// Builtin names: id, fig1_f1..fig1_f5, fig3_f1..fig3_f5, mean, example_f,
// doubling_map, proj_r1, linear_r2. Identity observables take their
// dimension from `in_dim`.
Observable catalog(const std::string& name, int in_dim = 2);
const std::vector<std::string>& catalog_names();

// Linear observable x -> A x with one or two rows of two columns (or a 1x1
// matrix for interval states).
Observable make_linear(std::string name, const std::vector<std::vector<double>>& rows);

} // namespace obsmatch
