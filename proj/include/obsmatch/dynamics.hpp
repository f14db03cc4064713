#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "obsmatch/rng.hpp"

namespace obsmatch {

// States and observation values both live in R^1 or R^2; unused trailing
// coordinates are zero.
using Point = std::array<double, 2>;
using Triangle = std::array<Point, 3>;
using DigitWeights = std::array<double, 3>;

struct DoublingMap {
    // Uniform noise amplitude added after each step; 0 gives the bare map.
    double jitter = 0.0;
};

struct HenonMap {
    double a = 1.4;
    double b = 0.3;
    int burn_in = 1000;
    double box_x = 1.5;  // initial draws uniform in [-box_x, box_x] x [-box_y, box_y]
    double box_y = 0.5;
    double escape = 1e6;
};

struct GasketMap {
    DigitWeights weights{0.5, 0.3, 0.2};
    int length = 52;
    Triangle vertices{{{0.0, 0.0}, {1.0, 0.0}, {0.5, 1.0}}};
};

// A finite address d_1 d_2 ... d_L over {0,1,2}. The digits are packed into
// two bit masks (one for the symbol 1, one for 2), which makes the barycentric
// coordinates of the embedded point exact dyadic rationals and the shift exact.
class GasketAddress {
public:
    static constexpr int kMaxLength = 52;

    GasketAddress(const std::vector<int>& digits, const DigitWeights& weights);

    static GasketAddress random(const DigitWeights& weights, int length, Rng& rng);
    // Inverse of embed() up to 2^-length: reads digits off the barycentric
    // coordinates of `p` with respect to `vertices`.
    static GasketAddress from_point(const Point& p, const Triangle& vertices, int length,
                                    const DigitWeights& weights);

    std::vector<int> digits() const;
    int length() const noexcept { return length_; }
    int leading_digit() const noexcept;
    const DigitWeights& weights() const noexcept { return weights_; }

    // Barycentric weights of vertices 1 and 2.
    double lambda1() const noexcept;
    double lambda2() const noexcept;

    // Drops d_1, appends a digit drawn from weights().
    GasketAddress shifted(Rng& rng) const;
    GasketAddress shifted_with(int next_digit) const;

    Point embed(const Triangle& vertices) const noexcept;

private:
    GasketAddress() = default;

    std::uint64_t ones_ = 0;
    std::uint64_t twos_ = 0;
    int length_ = 0;
    DigitWeights weights_{};
};

int draw_digit(const DigitWeights& weights, Rng& rng) noexcept;
void validate_weights(const DigitWeights& weights);

GasketAddress gasket_shift(const GasketAddress& address, Rng& rng);
Point gasket_embed(const GasketAddress& address, const Triangle& vertices = GasketMap{}.vertices);

class MapSystem {
public:
    using Variant = std::variant<DoublingMap, HenonMap, GasketMap>;

    MapSystem(Variant impl);  // NOLINT(google-explicit-constructor)

    const std::string& name() const noexcept { return name_; }
    int dim() const noexcept;
    std::map<std::string, double> params() const;
    const Variant& impl() const noexcept { return impl_; }

    // The deterministic map T. Mod-1 results are wrapped into [0,1).
    Point step(const Point& x) const;

    Point sample_initial(std::uint64_t seed) const;
    Point sample_initial(Rng& rng) const;

    // Interval maps with an absolutely continuous invariant measure only.
    bool has_density() const noexcept;
    double density(double x) const;
    double derivative(double x) const;

private:
    Variant impl_;
    std::string name_;
};

// Factory used by configs: "doubling" {jitter}, "henon" {a, b, burn_in,
// box_x, box_y}, "gasket" {p0, p1, p2, L}.
MapSystem make_system(const std::string& name, const std::map<std::string, double>& params = {});

// Streaming orbit. The generator supplies doubling-map jitter and fresh
// gasket digits; Hénon orbits ignore it after the initial draw.
class Orbit {
public:
    Orbit(const MapSystem& system, Rng rng);
    Orbit(const MapSystem& system, const Point& x0, Rng rng);

    const Point& point() const noexcept { return point_; }
    long long index() const noexcept { return index_; }
    void advance();

private:
    const MapSystem* system_;
    Rng rng_;
    Point point_{};
    long long index_ = 0;
    // Gasket orbits are advanced on the address, not the embedded point.
    std::optional<GasketAddress> address_;
};

std::vector<Point> trajectory(const MapSystem& system, const Point& x0, long long length,
                              std::uint64_t seed = 0);

} // namespace obsmatch
