#include "obsmatch/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "obsmatch/error.hpp"

namespace obsmatch {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double wrap01(double x) noexcept {
    x -= std::floor(x);
    return x >= 1.0 ? 0.0 : x;
}

std::string describe(const Point& p) {
    std::ostringstream os;
    os.precision(17);
    os << '(' << p[0] << ", " << p[1] << ')';
    return os.str();
}

void check_finite_henon(const HenonMap& m, const Point& p, long long index) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || std::abs(p[0]) > m.escape ||
        std::abs(p[1]) > m.escape) {
        throw DivergedOrbitError("henon orbit diverged at state " + describe(p) +
                                     (index >= 0 ? " (step " + std::to_string(index) + ")" : ""),
                                 index);
    }
}

Point henon_step(const HenonMap& m, const Point& p) noexcept {
    return {1.0 - m.a * p[0] * p[0] + p[1], m.b * p[0]};
}

// Barycentric coordinates (of vertices 1 and 2) of p.
std::array<double, 2> barycentric(const Point& p, const Triangle& v) {
    const double e1x = v[1][0] - v[0][0], e1y = v[1][1] - v[0][1];
    const double e2x = v[2][0] - v[0][0], e2y = v[2][1] - v[0][1];
    const double det = e1x * e2y - e2x * e1y;
    if (det == 0.0) throw Error(ErrorCode::Validation, "gasket vertices are collinear");
    const double dx = p[0] - v[0][0], dy = p[1] - v[0][1];
    return {(dx * e2y - e2x * dy) / det, (e1x * dy - dx * e1y) / det};
}

Point from_barycentric(double l1, double l2, const Triangle& v) noexcept {
    return {v[0][0] + l1 * (v[1][0] - v[0][0]) + l2 * (v[2][0] - v[0][0]),
            v[0][1] + l1 * (v[1][1] - v[0][1]) + l2 * (v[2][1] - v[0][1])};
}

double param_or(const std::map<std::string, double>& params, const std::string& key,
                double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void reject_unknown_keys(const std::string& system, const std::map<std::string, double>& params,
                         std::initializer_list<const char*> known) {
    for (const auto& [key, value] : params) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw Error(ErrorCode::Validation, system + ": unknown parameter '" + key + "'");
    }
}

} // namespace

// ---------------------------------------------------------------------------
// GasketAddress

void validate_weights(const DigitWeights& weights) {
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw Error(ErrorCode::Validation, "gasket weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw Error(ErrorCode::Validation, "gasket weights must sum to 1");
    }
}

int draw_digit(const DigitWeights& weights, Rng& rng) noexcept {
    const double u = rng.uniform();
    if (u < weights[0]) return 0;
    if (u < weights[0] + weights[1]) return 1;
    return weights[2] > 0.0 ? 2 : (weights[1] > 0.0 ? 1 : 0);
}

GasketAddress::GasketAddress(const std::vector<int>& digits, const DigitWeights& weights)
    : length_(static_cast<int>(digits.size())), weights_(weights) {
    validate_weights(weights);
    if (digits.empty() || length_ > kMaxLength) {
        throw Error(ErrorCode::InvalidArgument,
                    "gasket address length must be in [1, " + std::to_string(kMaxLength) + "]");
    }
    for (int d : digits) {
        if (d < 0 || d > 2) throw Error(ErrorCode::InvalidArgument, "gasket digit outside {0,1,2}");
        ones_ = (ones_ << 1) | static_cast<std::uint64_t>(d == 1);
        twos_ = (twos_ << 1) | static_cast<std::uint64_t>(d == 2);
    }
}

GasketAddress GasketAddress::random(const DigitWeights& weights, int length, Rng& rng) {
    validate_weights(weights);
    std::vector<int> digits(static_cast<std::size_t>(std::max(length, 0)));
    for (int& d : digits) d = draw_digit(weights, rng);
    return GasketAddress(digits, weights);
}

GasketAddress GasketAddress::from_point(const Point& p, const Triangle& vertices, int length,
                                        const DigitWeights& weights) {
    auto [l1, l2] = barycentric(p, vertices);
    std::vector<int> digits(static_cast<std::size_t>(std::max(length, 0)));
    for (int& d : digits) {
        if (l1 >= 0.5) {
            d = 1;
            l1 = 2.0 * l1 - 1.0;
            l2 = 2.0 * l2;
        } else if (l2 >= 0.5) {
            d = 2;
            l1 = 2.0 * l1;
            l2 = 2.0 * l2 - 1.0;
        } else {
            d = 0;
            l1 *= 2.0;
            l2 *= 2.0;
        }
    }
    return GasketAddress(digits, weights);
}

std::vector<int> GasketAddress::digits() const {
    std::vector<int> out(static_cast<std::size_t>(length_));
    for (int k = 0; k < length_; ++k) {
        const int bit = length_ - 1 - k;
        out[static_cast<std::size_t>(k)] =
            ((ones_ >> bit) & 1U) ? 1 : (((twos_ >> bit) & 1U) ? 2 : 0);
    }
    return out;
}

int GasketAddress::leading_digit() const noexcept {
    const int bit = length_ - 1;
    if ((ones_ >> bit) & 1U) return 1;
    if ((twos_ >> bit) & 1U) return 2;
    return 0;
}

double GasketAddress::lambda1() const noexcept {
    return std::ldexp(static_cast<double>(ones_), -length_);
}

double GasketAddress::lambda2() const noexcept {
    return std::ldexp(static_cast<double>(twos_), -length_);
}

GasketAddress GasketAddress::shifted_with(int next_digit) const {
    if (next_digit < 0 || next_digit > 2) {
        throw Error(ErrorCode::InvalidArgument, "gasket digit outside {0,1,2}");
    }
    GasketAddress out = *this;
    const std::uint64_t mask = (std::uint64_t{1} << length_) - 1;
    out.ones_ = ((ones_ << 1) & mask) | static_cast<std::uint64_t>(next_digit == 1);
    out.twos_ = ((twos_ << 1) & mask) | static_cast<std::uint64_t>(next_digit == 2);
    return out;
}

GasketAddress GasketAddress::shifted(Rng& rng) const {
    return shifted_with(draw_digit(weights_, rng));
}

Point GasketAddress::embed(const Triangle& vertices) const noexcept {
    return from_barycentric(lambda1(), lambda2(), vertices);
}

GasketAddress gasket_shift(const GasketAddress& address, Rng& rng) { return address.shifted(rng); }

Point gasket_embed(const GasketAddress& address, const Triangle& vertices) {
    return address.embed(vertices);
}

// ---------------------------------------------------------------------------
// MapSystem

MapSystem::MapSystem(Variant impl) : impl_(std::move(impl)) {
    name_ = std::visit(overloaded{[](const DoublingMap&) { return std::string("doubling"); },
                                  [](const HenonMap&) { return std::string("henon"); },
                                  [](const GasketMap&) { return std::string("gasket"); }},
                       impl_);
    std::visit(overloaded{[](const DoublingMap& m) {
                              if (!(m.jitter >= 0.0 && m.jitter < 1.0)) {
                                  throw Error(ErrorCode::Validation, "doubling: jitter must be in [0,1)");
                              }
                          },
                          [](const HenonMap& m) {
                              if (m.burn_in < 0) throw Error(ErrorCode::Validation, "henon: burn_in < 0");
                              if (!(m.box_x > 0.0 && m.box_y > 0.0)) {
                                  throw Error(ErrorCode::Validation, "henon: basin box must be nonempty");
                              }
                          },
                          [](const GasketMap& m) {
                              validate_weights(m.weights);
                              if (m.length < 1 || m.length > GasketAddress::kMaxLength) {
                                  throw Error(ErrorCode::Validation, "gasket: L must be in [1, 52]");
                              }
                              (void)barycentric(m.vertices[0], m.vertices);
                          }},
               impl_);
}

int MapSystem::dim() const noexcept { return std::holds_alternative<DoublingMap>(impl_) ? 1 : 2; }

std::map<std::string, double> MapSystem::params() const {
    return std::visit(
        overloaded{[](const DoublingMap& m) { return std::map<std::string, double>{{"jitter", m.jitter}}; },
                   [](const HenonMap& m) {
                       return std::map<std::string, double>{{"a", m.a},
                                                            {"b", m.b},
                                                            {"burn_in", m.burn_in},
                                                            {"box_x", m.box_x},
                                                            {"box_y", m.box_y}};
                   },
                   [](const GasketMap& m) {
                       return std::map<std::string, double>{{"p0", m.weights[0]},
                                                            {"p1", m.weights[1]},
                                                            {"p2", m.weights[2]},
                                                            {"L", m.length}};
                   }},
        impl_);
}

Point MapSystem::step(const Point& x) const {
    return std::visit(overloaded{[&](const DoublingMap&) -> Point { return {wrap01(2.0 * x[0]), 0.0}; },
                                 [&](const HenonMap& m) -> Point {
                                     Point next = henon_step(m, x);
                                     check_finite_henon(m, next, -1);
                                     return next;
                                 },
                                 [&](const GasketMap& m) -> Point {
                                     auto [l1, l2] = barycentric(x, m.vertices);
                                     const double d1 = l1 >= 0.5 ? 1.0 : 0.0;
                                     const double d2 = (d1 == 0.0 && l2 >= 0.5) ? 1.0 : 0.0;
                                     return from_barycentric(2.0 * l1 - d1, 2.0 * l2 - d2, m.vertices);
                                 }},
                      impl_);
}

Point MapSystem::sample_initial(std::uint64_t seed) const {
    Rng rng(seed);
    return sample_initial(rng);
}

Point MapSystem::sample_initial(Rng& rng) const {
    return std::visit(
        overloaded{[&](const DoublingMap&) -> Point { return {rng.uniform(), 0.0}; },
                   [&](const HenonMap& m) -> Point {
                       for (int attempt = 0; attempt <= 100; ++attempt) {
                           Point p{(2.0 * rng.uniform() - 1.0) * m.box_x,
                                   (2.0 * rng.uniform() - 1.0) * m.box_y};
                           bool escaped = false;
                           for (int i = 0; i < m.burn_in && !escaped; ++i) {
                               p = henon_step(m, p);
                               escaped = !std::isfinite(p[0]) || !std::isfinite(p[1]) ||
                                         std::abs(p[0]) > m.escape || std::abs(p[1]) > m.escape;
                           }
                           if (!escaped) return p;
                       }
                       throw Error(ErrorCode::BasinConfiguration,
                                   "henon: more than 100 consecutive initial draws diverged during "
                                   "burn-in; check a, b and the basin box");
                   },
                   [&](const GasketMap& m) -> Point {
                       return GasketAddress::random(m.weights, m.length, rng).embed(m.vertices);
                   }},
        impl_);
}

bool MapSystem::has_density() const noexcept { return std::holds_alternative<DoublingMap>(impl_); }

double MapSystem::density(double x) const {
    if (!has_density()) throw Error(ErrorCode::InvalidArgument, name_ + " has no invariant density");
    return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0;
}

double MapSystem::derivative(double /*x*/) const {
    if (!has_density()) throw Error(ErrorCode::InvalidArgument, name_ + " is not an interval map");
    return 2.0;
}

MapSystem make_system(const std::string& name, const std::map<std::string, double>& params) {
    if (name == "doubling") {
        reject_unknown_keys(name, params, {"jitter"});
        return MapSystem(DoublingMap{param_or(params, "jitter", 0.0)});
    }
    if (name == "henon") {
        reject_unknown_keys(name, params, {"a", "b", "burn_in", "box_x", "box_y"});
        HenonMap m;
        m.a = param_or(params, "a", m.a);
        m.b = param_or(params, "b", m.b);
        m.burn_in = static_cast<int>(param_or(params, "burn_in", m.burn_in));
        m.box_x = param_or(params, "box_x", m.box_x);
        m.box_y = param_or(params, "box_y", m.box_y);
        return MapSystem(m);
    }
    if (name == "gasket") {
        reject_unknown_keys(name, params, {"p0", "p1", "p2", "L"});
        GasketMap m;
        m.weights = {param_or(params, "p0", m.weights[0]), param_or(params, "p1", m.weights[1]),
                     param_or(params, "p2", m.weights[2])};
        m.length = static_cast<int>(param_or(params, "L", m.length));
        return MapSystem(m);
    }
    throw Error(ErrorCode::UnknownName, "unknown system '" + name + "'");
}

// ---------------------------------------------------------------------------
// Orbit

Orbit::Orbit(const MapSystem& system, Rng rng) : system_(&system), rng_(rng) {
    if (const auto* g = std::get_if<GasketMap>(&system.impl())) {
        address_ = GasketAddress::random(g->weights, g->length, rng_);
        point_ = address_->embed(g->vertices);
    } else {
        point_ = system.sample_initial(rng_);
    }
}

Orbit::Orbit(const MapSystem& system, const Point& x0, Rng rng)
    : system_(&system), rng_(rng), point_(x0) {
    if (const auto* g = std::get_if<GasketMap>(&system.impl())) {
        address_ = GasketAddress::from_point(x0, g->vertices, g->length, g->weights);
    }
}

void Orbit::advance() {
    ++index_;
    std::visit(overloaded{[&](const DoublingMap& m) {
                              double x = 2.0 * point_[0];
                              if (m.jitter > 0.0) x += m.jitter * (2.0 * rng_.uniform() - 1.0);
                              point_[0] = wrap01(x);
                          },
                          [&](const HenonMap& m) {
                              point_ = henon_step(m, point_);
                              check_finite_henon(m, point_, index_);
                          },
                          [&](const GasketMap& m) {
                              address_ = address_->shifted(rng_);
                              point_ = address_->embed(m.vertices);
                          }},
               system_->impl());
}

std::vector<Point> trajectory(const MapSystem& system, const Point& x0, long long length,
                              std::uint64_t seed) {
    if (length < 1) throw Error(ErrorCode::InvalidArgument, "trajectory length must be >= 1");
    std::vector<Point> out;
    out.reserve(static_cast<std::size_t>(length));
    Orbit orbit(system, x0, Rng(seed));
    out.push_back(orbit.point());
    for (long long i = 1; i < length; ++i) {
        orbit.advance();
        out.push_back(orbit.point());
    }
    return out;
}

} // namespace obsmatch
