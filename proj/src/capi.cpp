#include "obsmatch/obsmatch.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "obsmatch/analytic.hpp"
#include "obsmatch/error.hpp"
#include "obsmatch/evt.hpp"
#include "obsmatch/experiment.hpp"
#include "obsmatch/matching.hpp"

struct om_system {
    obsmatch::MapSystem impl;
};

struct om_observable {
    obsmatch::Observable impl;
};

struct om_series {
    std::vector<double> values;
};

struct om_interval_model {
    obsmatch::IntervalModel impl;
};

struct om_experiment {
    obsmatch::ExperimentConfig config;
    std::optional<obsmatch::RunSummary> last;
};

namespace {

thread_local std::string g_last_error;

om_status map_code(obsmatch::ErrorCode code) {
    using obsmatch::ErrorCode;
    switch (code) {
        case ErrorCode::InvalidArgument: return OM_ERR_INVALID_ARGUMENT;
        case ErrorCode::Validation: return OM_ERR_VALIDATION;
        case ErrorCode::DivergedOrbit: return OM_ERR_DIVERGED_ORBIT;
        case ErrorCode::BasinConfiguration: return OM_ERR_BASIN_CONFIGURATION;
        case ErrorCode::Evaluation: return OM_ERR_EVALUATION;
        case ErrorCode::Breakpoint: return OM_ERR_BREAKPOINT;
        case ErrorCode::DataQuality: return OM_ERR_DATA_QUALITY;
        case ErrorCode::InsufficientTail: return OM_ERR_INSUFFICIENT_TAIL;
        case ErrorCode::DegenerateSample: return OM_ERR_DEGENERATE_SAMPLE;
        case ErrorCode::FitFailure: return OM_ERR_FIT_FAILURE;
        case ErrorCode::InfiniteH: return OM_ERR_INFINITE_H;
        case ErrorCode::Model: return OM_ERR_MODEL;
        case ErrorCode::UnsupportedOrder: return OM_ERR_UNSUPPORTED_ORDER;
        case ErrorCode::UnknownName: return OM_ERR_UNKNOWN_NAME;
        case ErrorCode::Io: return OM_ERR_IO;
    }
    return OM_ERR_INTERNAL;
}

template <class F>
om_status guarded(F&& body) noexcept {
    try {
        body();
        g_last_error.clear();
        return OM_OK;
    } catch (const obsmatch::Error& e) {
        g_last_error = e.what();
        return map_code(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return OM_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return OM_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return OM_ERR_INTERNAL;
    }
}

void require(bool cond, const char* what) {
    if (!cond) throw obsmatch::Error(obsmatch::ErrorCode::InvalidArgument, what);
}

char* copy_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

} // namespace

extern "C" {

const char* om_version(void) { return obsmatch::version(); }

const char* om_status_string(om_status status) {
    switch (status) {
        case OM_OK: return "ok";
        case OM_ERR_INVALID_ARGUMENT: return "invalid argument";
        case OM_ERR_VALIDATION: return "validation error";
        case OM_ERR_DIVERGED_ORBIT: return "diverged orbit";
        case OM_ERR_BASIN_CONFIGURATION: return "basin configuration error";
        case OM_ERR_EVALUATION: return "evaluation error";
        case OM_ERR_BREAKPOINT: return "derivative at a breakpoint";
        case OM_ERR_DATA_QUALITY: return "data quality error";
        case OM_ERR_INSUFFICIENT_TAIL: return "insufficient tail";
        case OM_ERR_DEGENERATE_SAMPLE: return "degenerate sample";
        case OM_ERR_FIT_FAILURE: return "fit failure";
        case OM_ERR_INFINITE_H: return "infinite H";
        case OM_ERR_MODEL: return "model error";
        case OM_ERR_UNSUPPORTED_ORDER: return "unsupported order";
        case OM_ERR_UNKNOWN_NAME: return "unknown name";
        case OM_ERR_IO: return "I/O error";
        case OM_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* om_last_error(void) { return g_last_error.c_str(); }

void om_string_free(char* s) { delete[] s; }

om_status om_system_create(const char* name, const char* params_json, om_system** out) {
    return guarded([&] {
        require(name && out, "null argument");
        std::map<std::string, double> params;
        if (params_json && *params_json) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(params_json);
            } catch (const nlohmann::json::exception& e) {
                throw obsmatch::Error(obsmatch::ErrorCode::InvalidArgument, std::string("params: ") + e.what());
            }
            require(j.is_object(), "params must be a JSON object");
            for (auto it = j.begin(); it != j.end(); ++it) {
                require(it.value().is_number(), "params values must be numbers");
                params[it.key()] = it.value().get<double>();
            }
        }
        *out = new om_system{obsmatch::make_system(name, params)};
    });
}

void om_system_destroy(om_system* system) { delete system; }

int om_system_dim(const om_system* system) { return system ? system->impl.dim() : 0; }

om_status om_observable_create(const char* spec, int in_dim, om_observable** out) {
    return guarded([&] {
        require(spec && out, "null argument");
        const std::string s(spec);
        const bool is_json = !s.empty() && (s.front() == '{' || s.front() == '"');
        *out = new om_observable{is_json ? obsmatch::parse_observable(s, in_dim) : obsmatch::catalog(s, in_dim)};
    });
}

void om_observable_destroy(om_observable* obs) { delete obs; }

int om_observable_in_dim(const om_observable* obs) { return obs ? obs->impl.in_dim() : 0; }

int om_observable_out_dim(const om_observable* obs) { return obs ? obs->impl.out_dim() : 0; }

om_status om_observable_evaluate(const om_observable* obs, const double* x, double* y) {
    return guarded([&] {
        require(obs && x && y, "null argument");
        obsmatch::Point p{x[0], obs->impl.in_dim() > 1 ? x[1] : 0.0};
        const obsmatch::Point v = obs->impl.evaluate(p);
        for (int i = 0; i < obs->impl.out_dim(); ++i) y[i] = v[static_cast<std::size_t>(i)];
    });
}

om_status om_series_generate(const om_system* system, const om_observable* obs, int q, long long n,
                             uint64_t master_seed, uint64_t run, const char* metric, om_series** out) {
    return guarded([&] {
        require(system && obs && out, "null argument");
        obsmatch::MatchConfig cfg;
        cfg.q = q;
        cfg.n_total = n;
        cfg.block_size = 1;
        if (metric) cfg.metric = obsmatch::parse_metric(metric);
        auto series = obsmatch::y_process(system->impl, obs->impl, cfg, obsmatch::SeedPlan{master_seed, run});
        *out = new om_series{std::move(series.values)};
    });
}

om_status om_series_from_values(const double* values, size_t n, om_series** out) {
    return guarded([&] {
        require(out && (values || n == 0), "null argument");
        *out = new om_series{std::vector<double>(values, values + n)};
    });
}

om_status om_series_load(const char* path, om_series** out) {
    return guarded([&] {
        require(path && out, "null argument");
        *out = new om_series{obsmatch::load_series(path)};
    });
}

om_status om_series_dump(const om_series* series, const char* path) {
    return guarded([&] {
        require(series && path, "null argument");
        obsmatch::dump_series(series->values, path);
    });
}

void om_series_destroy(om_series* series) { delete series; }

size_t om_series_length(const om_series* series) { return series ? series->values.size() : 0; }

const double* om_series_data(const om_series* series) { return series ? series->values.data() : nullptr; }

om_status om_series_block_maxima(const om_series* series, long long block_size, om_series** out) {
    return guarded([&] {
        require(series && out, "null argument");
        *out = new om_series{obsmatch::block_maxima(series->values, block_size)};
    });
}

om_status om_fit_gumbel(const double* data, size_t n, om_gumbel* out) {
    return guarded([&] {
        require(data && out, "null argument");
        const auto p = obsmatch::fit_gumbel(std::span<const double>(data, n));
        *out = om_gumbel{p.location, p.scale, p.loglik, p.n_samples, p.iterations};
    });
}

namespace {
obsmatch::GumbelParams from_c(const om_gumbel& g) {
    obsmatch::GumbelParams p;
    p.location = g.location;
    p.scale = g.scale;
    p.loglik = g.loglik;
    p.n_samples = g.n_samples;
    p.iterations = g.iterations;
    return p;
}
} // namespace

om_status om_dq_from_gumbel(const om_gumbel* fit, int q, double* out) {
    return guarded([&] {
        require(fit && out, "null argument");
        *out = obsmatch::dq_from_gumbel(from_c(*fit), q);
    });
}

om_status om_theta_from_gumbel(const om_gumbel* fit, int q, long long block_size, double dq, double* out) {
    return guarded([&] {
        require(fit && out, "null argument");
        *out = obsmatch::theta_from_gumbel(from_c(*fit), q, block_size, dq);
    });
}

om_status om_estimate_ei(const double* data, size_t n, double quantile, int K, double* p_hat, om_ei* out) {
    return guarded([&] {
        require(data && out, "null argument");
        const auto e = obsmatch::estimate_ei(std::span<const double>(data, n), quantile, K);
        *out = om_ei{e.theta_hat, e.theta_hat_raw, e.threshold_u, e.exceedance_count, e.low_exceedances ? 1 : 0};
        if (p_hat) {
            for (std::size_t k = 0; k < e.p_hat.size(); ++k) p_hat[k] = e.p_hat[k];
        }
    });
}

om_status om_hq_from_theta(double theta, int q, double* out) {
    return guarded([&] {
        require(out, "null argument");
        *out = obsmatch::hq_from_theta(theta, q);
    });
}

om_status om_interval_model_doubling(const om_observable* obs, om_interval_model** out) {
    return guarded([&] {
        require(obs && out, "null argument");
        if (obs->impl.branches().empty()) {
            throw obsmatch::Error(obsmatch::ErrorCode::Model, "observable '" + obs->impl.name() + "' is not piecewise");
        }
        auto model = obsmatch::doubling_model(obs->impl.branches());
        model.validate();
        *out = new om_interval_model{std::move(model)};
    });
}

void om_interval_model_destroy(om_interval_model* model) { delete model; }

om_status om_theta_interval(const om_interval_model* model, int q, int resolution, double* out) {
    return guarded([&] {
        require(model && out, "null argument");
        *out = obsmatch::theta_q_interval(model->impl, q, resolution > 0 ? resolution : obsmatch::kDefaultResolution);
    });
}

om_status om_genericity(const om_interval_model* model, long long samples, int k_max, uint64_t seed,
                        double* h1_rate, double* h2_rates) {
    return guarded([&] {
        require(model, "null argument");
        const auto r = obsmatch::check_genericity(model->impl, samples, k_max, seed);
        if (h1_rate) *h1_rate = r.h1_violation_rate;
        if (h2_rates) {
            for (std::size_t k = 0; k < r.h2_violation_rate.size(); ++k) h2_rates[k] = r.h2_violation_rate[k];
        }
    });
}

om_status om_dq_self_similar(const double* weights, size_t n, double ratio, double q, double* out) {
    return guarded([&] {
        require(weights && out, "null argument");
        *out = obsmatch::dq_self_similar(std::span<const double>(weights, n), ratio, q);
    });
}

om_status om_hk_projection(double dq, int m, double* out) {
    return guarded([&] {
        require(out, "null argument");
        *out = obsmatch::hk_projection(dq, m);
    });
}

om_status om_experiment_load(const char* config_path, om_experiment** out) {
    return guarded([&] {
        require(config_path && out, "null argument");
        *out = new om_experiment{obsmatch::load_config(config_path), std::nullopt};
    });
}

om_status om_experiment_from_json(const char* config_json, om_experiment** out) {
    return guarded([&] {
        require(config_json && out, "null argument");
        *out = new om_experiment{obsmatch::parse_config(config_json), std::nullopt};
    });
}

om_status om_experiment_from_manifest(const char* manifest_path, om_experiment** out) {
    return guarded([&] {
        require(manifest_path && out, "null argument");
        *out = new om_experiment{obsmatch::config_from_manifest(manifest_path), std::nullopt};
    });
}

void om_experiment_destroy(om_experiment* exp) { delete exp; }

om_status om_experiment_set_seed(om_experiment* exp, uint64_t master_seed) {
    return guarded([&] {
        require(exp, "null argument");
        exp->config.master_seed = master_seed;
    });
}

om_status om_experiment_set_mode(om_experiment* exp, const char* mode) {
    return guarded([&] {
        require(exp && mode, "null argument");
        auto next = exp->config;
        next.mode = obsmatch::parse_mode(mode);
        next.validate();
        exp->config = next;
    });
}

om_status om_experiment_validate(const om_experiment* exp) {
    return guarded([&] {
        require(exp, "null argument");
        exp->config.validate();
    });
}

om_status om_experiment_config_json(const om_experiment* exp, char** out) {
    return guarded([&] {
        require(exp && out, "null argument");
        *out = copy_string(obsmatch::config_to_json(exp->config));
    });
}

om_status om_experiment_run(om_experiment* exp, const char* out_dir, int threads, int quiet) {
    return guarded([&] {
        require(exp, "null argument");
        obsmatch::RunOptions opts;
        if (out_dir) opts.out_dir = out_dir;
        opts.threads = threads;
        opts.quiet = quiet != 0;
        exp->last.reset();
        exp->last = obsmatch::run_experiment(exp->config, opts);
    });
}

om_status om_experiment_results_csv(const om_experiment* exp, char** out) {
    return guarded([&] {
        require(exp && out, "null argument");
        if (!exp->last) throw obsmatch::Error(obsmatch::ErrorCode::InvalidArgument, "experiment has not been run");
        *out = copy_string(obsmatch::format_csv(exp->last->rows));
    });
}

const char* om_experiment_csv_path(const om_experiment* exp) {
    return exp && exp->last ? exp->last->csv_path.c_str() : "";
}

const char* om_experiment_manifest_path(const om_experiment* exp) {
    return exp && exp->last ? exp->last->manifest_path.c_str() : "";
}

int om_experiment_failed_cells(const om_experiment* exp) {
    if (!exp || !exp->last) return 0;
    int failed = 0;
    for (const auto& c : exp->last->cells) failed += c.ok ? 0 : 1;
    return failed;
}

} // extern "C"
