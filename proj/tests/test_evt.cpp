#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "obsmatch/error.hpp"
#include "obsmatch/evt.hpp"
#include "obsmatch/matching.hpp"
#include "obsmatch/rng.hpp"

using namespace obsmatch;

namespace {

std::vector<double> gumbel_sample(double location, double scale, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) {
        double u = rng.uniform();
        while (u == 0.0) u = rng.uniform();
        x = location - scale * std::log(-std::log(u));
    }
    return v;
}

} // namespace

TEST_CASE("Gumbel MLE recovers synthetic parameters") {
    const auto data = gumbel_sample(3.0, 2.0, 100000, 1);
    const GumbelParams p = fit_gumbel(data);
    CHECK(std::abs(p.location / 3.0 - 1.0) < 0.02);
    CHECK(std::abs(p.scale / 2.0 - 1.0) < 0.02);
    CHECK(std::isfinite(p.loglik));
    CHECK(p.n_samples == 100000);
    // The MLE beats its own starting point.
    const GumbelParams m = fit_gumbel_moments(data);
    CHECK(p.loglik >= m.loglik);
}

TEST_CASE("MLE solves the score equations") {
    const auto data = gumbel_sample(-1.0, 0.7, 5000, 2);
    const GumbelParams p = fit_gumbel(data);
    double s_loc = 0.0, s_scale = 0.0;
    for (double x : data) {
        const double z = (x - p.location) / p.scale;
        s_loc += (1.0 - std::exp(-z)) / p.scale;
        s_scale += (-1.0 + z - z * std::exp(-z)) / p.scale;
    }
    CHECK(std::abs(s_loc) < 1e-6 * data.size());
    CHECK(std::abs(s_scale) < 1e-6 * data.size());
}

TEST_CASE("fit rejects degenerate and short input") {
    CHECK_THROWS_AS(fit_gumbel(std::vector<double>(100, 4.0)), Error);
    try {
        fit_gumbel(std::vector<double>(100, 4.0));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateSample);
    }
    CHECK_THROWS_AS(fit_gumbel(gumbel_sample(0, 1, 49, 3)), Error);
}

TEST_CASE("translation and scale equivariance") {
    const auto data = gumbel_sample(3.0, 2.0, 2000, 4);
    const GumbelParams base = fit_gumbel(data);

    std::vector<double> shifted(data);
    for (auto& x : shifted) x += 10.0;
    const GumbelParams s = fit_gumbel(shifted);
    CHECK(s.location == doctest::Approx(base.location + 10.0).epsilon(1e-9));
    CHECK(s.scale == doctest::Approx(base.scale).epsilon(1e-9));

    std::vector<double> doubled(data);
    for (auto& x : doubled) x *= 2.0;
    const GumbelParams d = fit_gumbel(doubled);
    CHECK(d.location == 2.0 * base.location);
    CHECK(d.scale == 2.0 * base.scale);
    CHECK(dq_from_gumbel(d, 2) == dq_from_gumbel(base, 2) / 2.0);
}

TEST_CASE("parametric bootstrap re-recovers the fit") {
    const std::size_t n = 1000;
    const GumbelParams fit = fit_gumbel(gumbel_sample(5.0, 1.5, n, 5));
    // Asymptotic standard errors from the Gumbel Fisher information.
    const double se_loc = fit.scale * std::sqrt(1.1086 / n);
    const double se_scale = fit.scale * std::sqrt(0.6079 / n);
    double loc_sum = 0.0, scale_sum = 0.0;
    const int replicates = 20;
    for (int r = 0; r < replicates; ++r) {
        const GumbelParams b = fit_gumbel(gumbel_sample(fit.location, fit.scale, n, 100 + r));
        CHECK(std::abs(b.location - fit.location) < 4.0 * se_loc);
        CHECK(std::abs(b.scale - fit.scale) < 4.0 * se_scale);
        loc_sum += b.location;
        scale_sum += b.scale;
    }
    CHECK(std::abs(loc_sum / replicates - fit.location) < 3.0 * se_loc);
    CHECK(std::abs(scale_sum / replicates - fit.scale) < 3.0 * se_scale);
}

TEST_CASE("parameter algebra") {
    GumbelParams p;
    p.scale = 1.0;
    CHECK(dq_from_gumbel(p, 2) == 1.0);
    p.scale = 0.5;
    CHECK(dq_from_gumbel(p, 3) == 1.0);
    CHECK_THROWS_AS(dq_from_gumbel(p, 1), Error);

    const double n = 50000.0;
    p.location = std::log(n) / (1.3 * 2);
    CHECK(theta_from_gumbel(p, 3, 50000, 1.3) == doctest::Approx(1.0));
    p.location = std::log(n / 2) / (1.3 * 2);
    CHECK(theta_from_gumbel(p, 3, 50000, 1.3) == doctest::Approx(0.5));
    p.location = std::log(4 * n) / 1.3;
    CHECK(theta_from_gumbel(p, 2, 50000, 1.3) == 1.0);
}

TEST_CASE("doubling map block maxima carry the ball-mass prefactor") {
    // mu_2(Y > u) = 2 e^{-u} and theta = 1/2, so the Gumbel location of a
    // block of n is log(2 * theta * n) = log n.
    MatchConfig cfg;
    cfg.q = 2;
    cfg.n_total = 10000000;
    cfg.block_size = 50000;
    const auto s = y_process(MapSystem(DoublingMap{1e-12}), catalog("id", 1), cfg, SeedPlan{1, 0});
    const GumbelParams g = fit_gumbel(block_maxima(s));
    CHECK(std::abs(g.location - std::log(50000.0)) < 0.25);
    CHECK(std::abs(dq_from_gumbel(g, 2) - 1.0) < 0.2);
    CHECK(theta_from_gumbel(g, 2, 50000, 1.0) > 0.78);
}

TEST_CASE("extremal index on handmade series") {
    std::vector<double> all_high(100, 5.0);
    const EIEstimate total = estimate_ei_at(all_high, 1.0, 5);
    CHECK(total.p_hat[0] == 1.0);
    CHECK(total.theta_hat == 0.0);

    std::vector<double> isolated(120, 0.0);
    for (std::size_t i = 0; i < isolated.size(); i += 10) isolated[i] = 2.0;
    const EIEstimate iso = estimate_ei_at(isolated, 1.0, 5);
    for (double p : iso.p_hat) CHECK(p == 0.0);
    CHECK(iso.theta_hat == 1.0);
    CHECK(iso.low_exceedances);

    // Exceedance at 0 returns after two quiet steps; at 5 it never does.
    std::vector<double> v{2, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    const EIEstimate e = estimate_ei_at(v, 1.0, 3);
    CHECK(e.exceedance_count == 2);
    CHECK(e.p_hat == std::vector<double>{0.0, 0.0, 0.5});
    CHECK(e.theta_hat == 0.5);

    CHECK_THROWS_AS(estimate_ei_at(std::vector<double>(50, 0.0), 1.0, 5), Error);
}

TEST_CASE("i.i.d. control gives (1 - lambda)^K") {
    Rng rng(77);
    std::vector<double> v(1000000);
    for (auto& x : v) x = rng.uniform();
    const EIEstimate e = estimate_ei(v, 0.99, 5);
    CHECK(std::abs(e.theta_hat - std::pow(0.99, 5)) < 0.01);
    CHECK_FALSE(e.low_exceedances);
}

TEST_CASE("estimate is rank based and decomposes exactly") {
    Rng rng(78);
    std::vector<double> v(200000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.uniform() + (i > 0 ? 0.5 * v[i - 1] : 0.0);
    std::vector<double> w(v);
    for (auto& x : w) x = std::exp(3.0 * x) - 7.0;
    const EIEstimate a = estimate_ei(v, 0.995, 5);
    const EIEstimate b = estimate_ei(w, 0.995, 5);
    CHECK(a.p_hat == b.p_hat);
    CHECK(a.theta_hat == b.theta_hat);
    CHECK(a.exceedance_count == b.exceedance_count);

    double sum = 0.0;
    for (double p : a.p_hat) sum += p;
    CHECK(a.theta_hat_raw == 1.0 - sum);
    CHECK(std::abs(a.theta_hat + sum - 1.0) <= 1e-15);
}

TEST_CASE("H from theta") {
    CHECK(hq_from_theta(0.0, 4) == 0.0);
    CHECK(hq_from_theta(0.5, 2) == doctest::Approx(std::log(2.0)));
    CHECK(hq_from_theta(0.5, 3) == doctest::Approx(0.3466).epsilon(1e-4));
    CHECK_THROWS_AS(hq_from_theta(1.0, 2), Error);
    try {
        hq_from_theta(1.0, 2);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InfiniteH);
    }
}

TEST_CASE("run aggregation") {
    const SpectrumResult a = aggregate_runs(std::vector<double>{1, 1, 1});
    CHECK(a.estimate_mean == 1.0);
    CHECK(a.estimate_std == 0.0);
    CHECK(a.run_count == 3);
    const SpectrumResult b = aggregate_runs(std::vector<double>{0, 1});
    CHECK(b.estimate_mean == 0.5);
    CHECK(b.estimate_std == 0.5);
    CHECK_THROWS_AS(aggregate_runs(std::vector<double>{}), Error);
}
