// Acceptance suite: one line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "obsmatch/analytic.hpp"
#include "obsmatch/evt.hpp"
#include "obsmatch/experiment.hpp"
#include "obsmatch/matching.hpp"
#include "obsmatch/rng.hpp"

using namespace obsmatch;

namespace {

constexpr std::uint64_t kSeed = 1;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        pass = pass && cond;
        if (!detail.empty()) detail += "; ";
        detail += what + (cond ? "" : " [miss]");
    }
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, a);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig base_config(const std::string& system, std::map<std::string, double> params,
                             const std::string& observable) {
    ExperimentConfig c;
    c.system = system;
    c.system_params = std::move(params);
    c.observable_json = "\"" + observable + "\"";
    c.master_seed = kSeed;
    c.runs = 10;
    return c;
}

RunSummary run(const ExperimentConfig& c, const std::string& tag) {
    RunOptions opts;
    opts.quiet = true;
    opts.threads = 0;
    opts.out_dir = (std::filesystem::temp_directory_path() / ("obsmatch_acceptance_" + tag)).string();
    return run_experiment(c, opts);
}

const CsvRow& row(const RunSummary& s, const std::string& kind, int q) {
    for (const auto& r : s.rows) {
        if (r.kind == kind && r.q == q) return r;
    }
    throw std::runtime_error("missing row " + kind);
}

Outcome a1() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const IntervalModel m = example_model();
    double worst = 0.0;
    for (int q = 2; q <= 5; ++q) {
        const double got = theta_q_interval(m, q);
        worst = std::max(worst, std::abs(got - example_theta_closed_form(q)));
    }
    const double dt = seconds_since(t0);
    o.require(worst < 1e-6, "max |theta - closed form| q=2..5 " + fmt("%.2e", worst) + " < 1e-6");
    o.require(dt < 5.0, "time " + fmt("%.2f", dt) + " s < 5 s");
    return o;
}

Outcome a2() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig c = base_config("doubling", {{"jitter", 1e-12}}, "example_f");
    c.q_list = {2, 3, 4, 5};
    c.n_total = 2000000;
    c.quantile = 0.99999;
    c.K = 5;
    c.mode = Mode::EstimateEi;
    const RunSummary s = run(c, "a2");
    for (int q = 2; q <= 5; ++q) {
        const double mean = row(s, "theta_hat", q).mean;
        const double target = example_theta_closed_form(q);
        o.require(std::abs(mean - target) <= 0.02,
                  "q=" + std::to_string(q) + " theta_hat " + fmt("%.4f", mean) + " vs " + fmt("%.4f", target));
    }
    double worst_pk = 0.0;
    for (const auto& cell : s.cells) {
        if (!cell.ok) continue;
        for (std::size_t k = 1; k < cell.ei->p_hat.size(); ++k) worst_pk = std::max(worst_pk, cell.ei->p_hat[k]);
    }
    int failed = 0;
    for (const auto& cell : s.cells) failed += cell.ok ? 0 : 1;
    o.require(failed == 0, "failed runs " + std::to_string(failed));
    o.require(worst_pk <= 0.01, "max p_hat_k (k>=1, any run) " + fmt("%.4f", worst_pk) + " <= 0.01");
    const double dt = seconds_since(t0);
    o.require(dt < 600.0, "time " + fmt("%.0f", dt) + " s < 600 s");
    return o;
}

// Gasket block-maxima runs shared by A3 and A4.
struct GasketRuns {
    std::map<std::string, RunSummary> by_observable;
    double seconds = 0.0;
};

const GasketRuns& gasket_runs() {
    static const GasketRuns runs = [] {
        GasketRuns g;
        const auto t0 = std::chrono::steady_clock::now();
        for (const char* obs : {"id", "fig1_f2"}) {
            ExperimentConfig c = base_config("gasket", {{"p0", 0.5}, {"p1", 0.3}, {"p2", 0.2}}, obs);
            c.q_list = {2, 3};
            c.n_total = 10000000;
            c.block_size = 10000;
            c.mode = Mode::EstimateDq;
            g.by_observable.emplace(obs, run(c, std::string("a3_") + obs));
        }
        g.seconds = seconds_since(t0);
        for (const char* obs : {"linear_r2", "proj_r1"}) {
            ExperimentConfig c = base_config("gasket", {{"p0", 0.5}, {"p1", 0.3}, {"p2", 0.2}}, obs);
            c.q_list = {2};
            c.n_total = 10000000;
            c.block_size = 10000;
            c.mode = Mode::EstimateDq;
            g.by_observable.emplace(obs, run(c, std::string("a4_") + obs));
        }
        return g;
    }();
    return runs;
}

Outcome a3() {
    Outcome o;
    const auto& g = gasket_runs();
    const std::vector<double> w{0.5, 0.3, 0.2};
    for (int q : {2, 3}) {
        const double exact = dq_self_similar(w, 0.5, q);
        const double id = row(g.by_observable.at("id"), "dq", q).mean;
        const double f2 = row(g.by_observable.at("fig1_f2"), "dq", q).mean;
        o.require(std::abs(id - exact) <= 0.05,
                  "q=" + std::to_string(q) + " dq(id) " + fmt("%.4f", id) + " vs " + fmt("%.4f", exact));
        o.require(std::abs(f2 - id) <= 0.05, "q=" + std::to_string(q) + " dq(f2) " + fmt("%.4f", f2));
    }
    o.require(g.seconds < 1800.0, "time " + fmt("%.0f", g.seconds) + " s < 1800 s");
    return o;
}

Outcome a4() {
    Outcome o;
    const auto& g = gasket_runs();
    const double d2 = row(g.by_observable.at("id"), "dq", 2).mean;
    const double r2 = row(g.by_observable.at("linear_r2"), "dq", 2).mean;
    const double r1 = row(g.by_observable.at("proj_r1"), "dq", 2).mean;
    o.require(d2 < 2.0, "D2 estimate " + fmt("%.4f", d2) + " < 2");
    o.require(std::abs(r2 - hk_projection(d2, 2)) <= 0.05, "R^2 linear " + fmt("%.4f", r2) + " vs D2");
    o.require(std::abs(r1 - hk_projection(d2, 1)) <= 0.05, "R^1 projection " + fmt("%.4f", r1) + " vs 1");
    return o;
}

double henon_theta(double b, const std::string& observable, const std::string& tag) {
    ExperimentConfig c = base_config("henon", {{"a", 1.4}, {"b", b}}, observable);
    c.q_list = {2};
    c.n_total = 1000000;
    c.block_size = 10000;
    c.quantile = 0.999;
    c.K = 5;
    c.mode = Mode::EstimateEi;
    return row(run(c, tag), "theta_hat", 2).mean;
}

Outcome a5() {
    Outcome o;
    const double low = henon_theta(0.1, "mean", "a5_b01");
    const double high = henon_theta(0.3, "mean", "a5_b03");
    o.require(low < high, "theta_hat b=0.1 " + fmt("%.4f", low) + " < b=0.3 " + fmt("%.4f", high));
    return o;
}

Outcome a6() {
    Outcome o;
    const double f1 = henon_theta(0.3, "fig3_f1", "a6_f1");
    const double f4 = henon_theta(0.3, "fig3_f4", "a6_f4");
    const double f5 = henon_theta(0.3, "fig3_f5", "a6_f5");
    o.require(f4 > f1, "f4 " + fmt("%.4f", f4) + " > f1 " + fmt("%.4f", f1));
    o.require(f5 > f4, "f5 " + fmt("%.4f", f5) + " > f4");
    return o;
}

Outcome a7() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();

    Rng rng(kSeed);
    std::vector<double> g(100000);
    for (auto& x : g) {
        double u = rng.uniform();
        while (u == 0.0) u = rng.uniform();
        x = 3.0 - 2.0 * std::log(-std::log(u));
    }
    const GumbelParams p = fit_gumbel(g);
    o.require(std::abs(p.location / 3.0 - 1.0) <= 0.02 && std::abs(p.scale / 2.0 - 1.0) <= 0.02,
              "Gumbel fit (" + fmt("%.4f", p.location) + ", " + fmt("%.4f", p.scale) + ") vs (3, 2) within 2%");

    std::vector<double> iid(1000000);
    for (auto& x : iid) x = rng.uniform();
    const double th = estimate_ei(iid, 0.99, 5).theta_hat;
    o.require(std::abs(th - std::pow(0.99, 5)) <= 0.01, "iid theta_hat " + fmt("%.4f", th) + " vs 0.951");

    MatchConfig cfg;
    cfg.q = 2;
    cfg.n_total = 1000000;
    cfg.block_size = 10000;
    const auto s = y_process(MapSystem(DoublingMap{1e-12}), catalog("id", 1), cfg, SeedPlan{kSeed, 0});
    std::vector<double> us, ls;
    for (double u = 4.0; u <= 8.0 + 1e-9; u += 0.25) {
        long long c = 0;
        for (double y : s.values) c += y > u ? 1 : 0;
        us.push_back(u);
        ls.push_back(std::log(static_cast<double>(c) / s.values.size()));
    }
    const double mu = std::accumulate(us.begin(), us.end(), 0.0) / us.size();
    const double ml = std::accumulate(ls.begin(), ls.end(), 0.0) / ls.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < us.size(); ++i) {
        sxy += (us[i] - mu) * (ls[i] - ml);
        sxx += (us[i] - mu) * (us[i] - mu);
    }
    const double slope = sxy / sxx;
    o.require(std::abs(slope + 1.0) <= 0.05, "tail slope " + fmt("%.4f", slope) + " vs -1");

    const double dt = seconds_since(t0);
    o.require(dt < 120.0, "time " + fmt("%.1f", dt) + " s < 120 s");
    return o;
}

Outcome a8() {
    Outcome o;
    const GenericityReport ex = check_genericity(example_model(), 10000, 5, kSeed);
    double h2 = 0.0;
    for (double v : ex.h2_violation_rate) h2 = std::max(h2, v);
    o.require(ex.h1_violation_rate == 0.0 && h2 == 0.0,
              "example model violations h1 " + fmt("%g", ex.h1_violation_rate) + ", h2 " + fmt("%g", h2));

    const IntervalModel self = doubling_model(catalog("doubling_map", 1).branches());
    const GenericityReport r = check_genericity(self, 10000, 5, kSeed);
    bool witnesses_ok = !r.h1_witnesses.empty();
    for (const auto& w : r.h1_witnesses) witnesses_ok = witnesses_ok && std::abs(std::fmod(w.x + 0.5, 1.0) - w.y) < 1e-12;
    o.require(r.h1_violation_rate == 1.0, "f = T h1 rate " + fmt("%g", r.h1_violation_rate));
    o.require(witnesses_ok, "witnesses y = x + 1/2 mod 1");
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5}, {"A6", a6}, {"A7", a7}, {"A8", a8}};
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s %s %s\n", name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
