#include "obsmatch/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <new>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "obsmatch/error.hpp"

namespace obsmatch {

using json = nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::Validation, path + ": " + what);
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) invalid(path + "." + it.key(), "unknown field");
    }
}

double get_number(const json& v, const std::string& path) {
    if (!v.is_number()) invalid(path, "expected a number");
    return v.get<double>();
}

long long get_integer(const json& v, const std::string& path) {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::floor(d) == d && std::abs(d) < 9.0e18) return static_cast<long long>(d);
    }
    invalid(path, "expected an integer");
}

std::string get_string(const json& v, const std::string& path) {
    if (!v.is_string()) invalid(path, "expected a string");
    return v.get<std::string>();
}

PiecewiseBranch parse_branch(const json& b, const std::string& path) {
    if (!b.is_object()) invalid(path, "expected an object");
    reject_unknown(b, path, {"domain", "affine", "monomial"});
    const json* dom = find(b, "domain");
    if (!dom || !dom->is_array() || dom->size() != 2) invalid(path + ".domain", "expected [lo, hi]");
    const double lo = get_number((*dom)[0], path + ".domain[0]");
    const double hi = get_number((*dom)[1], path + ".domain[1]");
    const json* aff = find(b, "affine");
    const json* mono = find(b, "monomial");
    if ((aff != nullptr) == (mono != nullptr)) invalid(path, "exactly one of 'affine' or 'monomial' is required");
    const json& coeffs = aff ? *aff : *mono;
    const std::string cpath = path + (aff ? ".affine" : ".monomial");
    if (!coeffs.is_array() || coeffs.size() != 2) invalid(cpath, "expected two numbers");
    const double c0 = get_number(coeffs[0], cpath + "[0]");
    const double c1 = get_number(coeffs[1], cpath + "[1]");
    try {
        return aff ? PiecewiseBranch::affine(lo, hi, c0, c1) : PiecewiseBranch::monomial(lo, hi, c0, c1);
    } catch (const Error& e) {
        invalid(path, e.what());
    }
}

Observable observable_from_json(const json& spec, int in_dim) {
    const std::string path = "config.observable";
    if (spec.is_string()) return catalog(spec.get<std::string>(), in_dim);
    if (!spec.is_object()) invalid(path, "expected a catalog name or an object");
    reject_unknown(spec, path, {"name", "catalog", "linear", "branches"});
    std::string name = "custom";
    if (const json* n = find(spec, "name")) name = get_string(*n, path + ".name");
    int kinds = 0;
    for (const char* k : {"catalog", "linear", "branches"}) kinds += spec.contains(k) ? 1 : 0;
    if (kinds != 1) invalid(path, "exactly one of 'catalog', 'linear' or 'branches' is required");
    if (const json* c = find(spec, "catalog")) return catalog(get_string(*c, path + ".catalog"), in_dim);
    if (const json* lin = find(spec, "linear")) {
        if (!lin->is_array()) invalid(path + ".linear", "expected an array of rows");
        std::vector<std::vector<double>> rows;
        for (std::size_t r = 0; r < lin->size(); ++r) {
            const std::string rpath = path + ".linear[" + std::to_string(r) + "]";
            if (!(*lin)[r].is_array()) invalid(rpath, "expected an array");
            std::vector<double> row;
            for (std::size_t c = 0; c < (*lin)[r].size(); ++c) {
                row.push_back(get_number((*lin)[r][c], rpath + "[" + std::to_string(c) + "]"));
            }
            rows.push_back(std::move(row));
        }
        return make_linear(name, rows);
    }
    const json& branches = spec.at("branches");
    if (!branches.is_array() || branches.empty()) invalid(path + ".branches", "expected a nonempty array");
    std::vector<PiecewiseBranch> list;
    for (std::size_t i = 0; i < branches.size(); ++i) {
        list.push_back(parse_branch(branches[i], path + ".branches[" + std::to_string(i) + "]"));
    }
    return Observable(name, std::move(list));
}

std::string iso_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::filesystem::path resolve(const std::string& out_dir, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : std::filesystem::path(out_dir) / path;
}

void make_parent(const std::filesystem::path& path) {
    // Failures surface when the file is opened, with the path in the message.
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    make_parent(path);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

bool wants_dq(Mode m) { return m == Mode::EstimateDq || m == Mode::All; }
bool wants_ei(Mode m) { return m == Mode::EstimateEi || m == Mode::All; }
bool wants_simulation(Mode m) { return wants_dq(m) || wants_ei(m); }

} // namespace

const char* version() noexcept { return "0.1.0"; }

const char* to_string(Mode mode) noexcept {
    switch (mode) {
        case Mode::EstimateDq: return "estimate_dq";
        case Mode::EstimateEi: return "estimate_ei";
        case Mode::Analytic: return "analytic";
        case Mode::Genericity: return "genericity";
        case Mode::All: return "all";
    }
    return "all";
}

Mode parse_mode(const std::string& text) {
    for (Mode m : {Mode::EstimateDq, Mode::EstimateEi, Mode::Analytic, Mode::Genericity, Mode::All}) {
        if (text == to_string(m)) return m;
    }
    throw Error(ErrorCode::Validation,
                "config.mode: expected one of estimate_dq, estimate_ei, analytic, genericity, all");
}

// ---------------------------------------------------------------------------
// Config

MapSystem ExperimentConfig::make_system() const {
    try {
        return obsmatch::make_system(system, system_params);
    } catch (const Error& e) {
        invalid("config.system", e.what());
    }
}

Observable parse_observable(const std::string& json_text, int in_dim) {
    json spec;
    try {
        spec = json::parse(json_text);
    } catch (const json::exception& e) {
        invalid("config.observable", e.what());
    }
    try {
        return observable_from_json(spec, in_dim);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Validation) throw;
        invalid("config.observable", e.what());
    }
}

Observable ExperimentConfig::make_observable() const { return parse_observable(observable_json, make_system().dim()); }

std::string ExperimentConfig::observable_name() const { return make_observable().name(); }

std::optional<IntervalModel> ExperimentConfig::interval_model() const {
    if (system != "doubling") return std::nullopt;
    const Observable obs = make_observable();
    if (obs.branches().empty()) return std::nullopt;
    return doubling_model(obs.branches());
}

void ExperimentConfig::validate() const {
    if (q_list.empty()) invalid("config.q_list", "must not be empty");
    for (std::size_t i = 0; i < q_list.size(); ++i) {
        if (q_list[i] < 2) invalid("config.q_list[" + std::to_string(i) + "]", "must be >= 2");
    }
    if (runs < 1) invalid("config.runs", "must be >= 1");
    if (n_total < 1) invalid("config.n_total", "must be >= 1");
    if (block_size < 1) invalid("config.block_size", "must be >= 1");
    if (!(quantile > 0.0 && quantile < 1.0)) invalid("config.quantile", "must be in (0,1)");
    if (K < 1) invalid("config.K", "must be >= 1");
    if (!(floor > 0.0)) invalid("config.floor", "must be > 0");
    if (threads < 0) invalid("config.threads", "must be >= 0");
    if (resolution < 1) invalid("config.analytic.resolution", "must be >= 1");
    if (genericity_samples < 1) invalid("config.genericity.samples", "must be >= 1");
    if (k_max < 0) invalid("config.genericity.k_max", "must be >= 0");
    if (wants_dq(mode) && n_total < 2 * block_size) {
        invalid("config.n_total", "must be at least 2 * block_size for block-maxima estimation");
    }
    if (wants_ei(mode) && static_cast<double>(n_total) * (1.0 - quantile) < 1.0 - 1e-9) {
        invalid("config.quantile", "n_total * (1 - quantile) must be >= 1");
    }
    if (csv_path.empty()) invalid("config.outputs.csv", "must not be empty");
    if (manifest_path.empty()) invalid("config.outputs.manifest", "must not be empty");
    const MapSystem sys = make_system();
    const Observable obs = make_observable();
    if (obs.in_dim() != sys.dim()) {
        invalid("config.observable", "'" + obs.name() + "' expects dimension " + std::to_string(obs.in_dim()) +
                                         ", system '" + system + "' has dimension " + std::to_string(sys.dim()));
    }
    if (mode == Mode::Genericity && !interval_model()) {
        invalid("config.mode", "genericity needs the doubling map with a piecewise observable");
    }
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        invalid("config", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) invalid("config", "expected a JSON object");
    reject_unknown(j, "config",
                   {"name", "system", "observable", "q_list", "n_total", "block_size", "quantile", "K", "runs",
                    "master_seed", "metric", "floor", "mode", "threads", "analytic", "genericity", "outputs"});

    ExperimentConfig c;
    if (const json* v = find(j, "name")) c.name = get_string(*v, "config.name");
    const json* sys = find(j, "system");
    if (!sys) invalid("config.system", "missing");
    if (sys->is_string()) {
        c.system = sys->get<std::string>();
    } else if (sys->is_object()) {
        reject_unknown(*sys, "config.system", {"name", "params"});
        const json* n = find(*sys, "name");
        if (!n) invalid("config.system.name", "missing");
        c.system = get_string(*n, "config.system.name");
        if (const json* p = find(*sys, "params")) {
            if (!p->is_object()) invalid("config.system.params", "expected an object");
            for (auto it = p->begin(); it != p->end(); ++it) {
                c.system_params[it.key()] = get_number(it.value(), "config.system.params." + it.key());
            }
        }
    } else {
        invalid("config.system", "expected a name or {name, params}");
    }
    const json* obs = find(j, "observable");
    if (!obs) invalid("config.observable", "missing");
    c.observable_json = obs->dump();

    if (const json* v = find(j, "q_list")) {
        if (!v->is_array()) invalid("config.q_list", "expected an array of integers");
        c.q_list.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
            c.q_list.push_back(static_cast<int>(get_integer((*v)[i], "config.q_list[" + std::to_string(i) + "]")));
        }
    }
    if (const json* v = find(j, "n_total")) c.n_total = get_integer(*v, "config.n_total");
    if (const json* v = find(j, "block_size")) c.block_size = get_integer(*v, "config.block_size");
    if (const json* v = find(j, "quantile")) c.quantile = get_number(*v, "config.quantile");
    if (const json* v = find(j, "K")) c.K = static_cast<int>(get_integer(*v, "config.K"));
    if (const json* v = find(j, "runs")) c.runs = static_cast<int>(get_integer(*v, "config.runs"));
    if (const json* v = find(j, "master_seed")) {
        if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
            invalid("config.master_seed", "expected a nonnegative integer");
        }
        c.master_seed = v->get<std::uint64_t>();
    }
    if (const json* v = find(j, "metric")) c.metric = parse_metric(get_string(*v, "config.metric"));
    if (const json* v = find(j, "floor")) c.floor = get_number(*v, "config.floor");
    if (const json* v = find(j, "mode")) c.mode = parse_mode(get_string(*v, "config.mode"));
    if (const json* v = find(j, "threads")) c.threads = static_cast<int>(get_integer(*v, "config.threads"));
    if (const json* a = find(j, "analytic")) {
        if (!a->is_object()) invalid("config.analytic", "expected an object");
        reject_unknown(*a, "config.analytic", {"resolution"});
        if (const json* v = find(*a, "resolution")) {
            c.resolution = static_cast<int>(get_integer(*v, "config.analytic.resolution"));
        }
    }
    if (const json* g = find(j, "genericity")) {
        if (!g->is_object()) invalid("config.genericity", "expected an object");
        reject_unknown(*g, "config.genericity", {"samples", "k_max"});
        if (const json* v = find(*g, "samples")) c.genericity_samples = get_integer(*v, "config.genericity.samples");
        if (const json* v = find(*g, "k_max")) c.k_max = static_cast<int>(get_integer(*v, "config.genericity.k_max"));
    }
    if (const json* o = find(j, "outputs")) {
        if (!o->is_object()) invalid("config.outputs", "expected an object");
        reject_unknown(*o, "config.outputs", {"csv", "manifest", "genericity", "series_dir"});
        if (const json* v = find(*o, "csv")) c.csv_path = get_string(*v, "config.outputs.csv");
        if (const json* v = find(*o, "manifest")) c.manifest_path = get_string(*v, "config.outputs.manifest");
        if (const json* v = find(*o, "genericity")) c.genericity_path = get_string(*v, "config.outputs.genericity");
        if (const json* v = find(*o, "series_dir")) {
            c.series_dir = v->is_null() ? std::string() : get_string(*v, "config.outputs.series_dir");
        }
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c, int indent) {
    json j;
    j["name"] = c.name;
    j["system"] = {{"name", c.system}, {"params", c.system_params}};
    j["observable"] = json::parse(c.observable_json);
    j["q_list"] = c.q_list;
    j["n_total"] = c.n_total;
    j["block_size"] = c.block_size;
    j["quantile"] = c.quantile;
    j["K"] = c.K;
    j["runs"] = c.runs;
    j["master_seed"] = c.master_seed;
    j["metric"] = to_string(c.metric);
    j["floor"] = c.floor;
    j["mode"] = to_string(c.mode);
    j["threads"] = c.threads;
    j["analytic"] = {{"resolution", c.resolution}};
    j["genericity"] = {{"samples", c.genericity_samples}, {"k_max", c.k_max}};
    j["outputs"] = {{"csv", c.csv_path}, {"manifest", c.manifest_path}, {"genericity", c.genericity_path}};
    if (!c.series_dir.empty()) j["outputs"]["series_dir"] = c.series_dir;
    return j.dump(indent);
}

// ---------------------------------------------------------------------------
// CSV

std::string format_csv(const std::vector<CsvRow>& rows, bool header) {
    std::string out;
    if (header) out += std::string(kCsvHeader) + "\n";
    for (const auto& r : rows) {
        out += csv_field(r.kind) + ',' + csv_field(r.system) + ',' + csv_field(r.observable) + ',' +
               std::to_string(r.q) + ',' + std::to_string(r.run_count) + ',' + format_double(r.mean) + ',' +
               format_double(r.std) + ',' + std::to_string(r.n_total) + ',' + std::to_string(r.block_size) + ',' +
               format_double(r.quantile) + ',' + std::to_string(r.K) + ',' + std::to_string(r.seed) + '\n';
    }
    return out;
}

std::vector<CsvRow> parse_csv(const std::string& text) {
    std::vector<CsvRow> rows;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (first) {
            first = false;
            if (line == kCsvHeader) continue;
            throw Error(ErrorCode::Io, "CSV header mismatch");
        }
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 12) throw Error(ErrorCode::Io, "CSV line " + std::to_string(line_no) + ": expected 12 fields");
        try {
            CsvRow r;
            r.kind = f[0];
            r.system = f[1];
            r.observable = f[2];
            r.q = std::stoi(f[3]);
            r.run_count = std::stoi(f[4]);
            r.mean = std::stod(f[5]);
            r.std = std::stod(f[6]);
            r.n_total = std::stoll(f[7]);
            r.block_size = std::stoll(f[8]);
            r.quantile = std::stod(f[9]);
            r.K = std::stoi(f[10]);
            r.seed = std::stoull(f[11]);
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::Io, "CSV line " + std::to_string(line_no) + ": malformed number");
        }
    }
    return rows;
}

void emit_results(const std::vector<CsvRow>& rows, const std::string& path, bool append) {
    const std::filesystem::path p(path);
    make_parent(p);
    std::error_code ec;
    const bool header = !append || !std::filesystem::exists(p, ec) || std::filesystem::file_size(p, ec) == 0;
    std::ofstream out(p, append ? std::ios::app : std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
    out << format_csv(rows, header);
    if (!out) throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Running

CellOutcome run_cell(const ExperimentConfig& config, const MapSystem& system, const Observable& obs, int q,
                     int run) {
    CellOutcome cell;
    cell.q = q;
    cell.run = run;
    const SeedPlan seeds{config.master_seed, static_cast<std::uint64_t>(run)};
    cell.stream_seed = seeds.stream_seed();
    try {
        const MatchConfig mc{q, config.n_total, config.block_size, config.metric, config.floor};
        const MatchSeries series = y_process(system, obs, mc, seeds);
        if (!config.series_dir.empty()) {
            const auto file = std::filesystem::path(config.series_dir) /
                              ("series_q" + std::to_string(q) + "_run" + std::to_string(run) + ".bin");
            make_parent(file);
            dump_series(series.values, file.string());
        }
        if (wants_dq(config.mode)) {
            const GumbelParams g = fit_gumbel(block_maxima(series));
            cell.dq = dq_from_gumbel(g, q);
            cell.theta_gumbel = theta_from_gumbel(g, q, config.block_size, *cell.dq);
        }
        if (wants_ei(config.mode)) cell.ei = estimate_ei(series, config.quantile, config.K);
    } catch (const Error& e) {
        cell.ok = false;
        cell.message = e.what();
    } catch (const std::bad_alloc&) {
        cell.ok = false;
        cell.message = "out of memory";
    }
    return cell;
}

std::vector<CsvRow> analytic_rows(const ExperimentConfig& config) {
    std::vector<CsvRow> rows;
    const std::string obs_name = config.observable_name();
    auto row = [&](const std::string& kind, int q, double value) {
        CsvRow r;
        r.kind = kind;
        r.system = config.system;
        r.observable = obs_name;
        r.q = q;
        r.run_count = 1;
        r.mean = value;
        r.n_total = config.n_total;
        r.block_size = config.block_size;
        r.quantile = config.quantile;
        r.K = config.K;
        r.seed = config.master_seed;
        return r;
    };
    const auto model = config.interval_model();
    const MapSystem sys = config.make_system();
    for (int q : config.q_list) {
        if (model) rows.push_back(row("theta_analytic", q, theta_q_interval(*model, q, config.resolution)));
        if (const auto* g = std::get_if<GasketMap>(&sys.impl())) {
            rows.push_back(row("dq_analytic", q, dq_self_similar(g->weights, 0.5, q)));
        } else if (std::holds_alternative<DoublingMap>(sys.impl())) {
            // Lebesgue measure; piecewise C^1 observations with f' != 0 keep a density.
            rows.push_back(row("dq_analytic", q, 1.0));
        }
    }
    return rows;
}

std::vector<CsvRow> summarize(const ExperimentConfig& config, const std::vector<CellOutcome>& cells) {
    const std::string obs_name = config.observable_name();
    auto base = [&](const std::string& kind, int q) {
        CsvRow r;
        r.kind = kind;
        r.system = config.system;
        r.observable = obs_name;
        r.q = q;
        r.n_total = config.n_total;
        r.block_size = config.block_size;
        r.quantile = config.quantile;
        r.K = config.K;
        r.seed = config.master_seed;
        return r;
    };
    auto aggregate_row = [&](const std::string& kind, int q, const std::vector<double>& values) {
        CsvRow r = base(kind, q);
        const SpectrumResult s = aggregate_runs(values);
        r.run_count = s.run_count;
        r.mean = s.estimate_mean;
        r.std = s.estimate_std;
        return r;
    };

    std::vector<CsvRow> analytic;
    if (config.mode == Mode::Analytic || config.mode == Mode::All) analytic = analytic_rows(config);

    std::set<int> qs(config.q_list.begin(), config.q_list.end());
    std::vector<CsvRow> rows;
    for (int q : qs) {
        std::vector<const CellOutcome*> ok;
        const CellOutcome* first_failure = nullptr;
        for (const auto& c : cells) {
            if (c.q != q) continue;
            if (c.ok) {
                ok.push_back(&c);
            } else if (!first_failure) {
                first_failure = &c;
            }
        }
        if (wants_simulation(config.mode)) {
            if (2 * static_cast<int>(ok.size()) < config.runs) {
                throw Error(ErrorCode::DataQuality,
                            "q=" + std::to_string(q) + ": only " + std::to_string(ok.size()) + " of " +
                                std::to_string(config.runs) + " runs succeeded" +
                                (first_failure ? "; first failure: " + first_failure->message : std::string()));
            }
        }
        std::optional<double> dq_mean, theta_hat_mean;
        if (wants_dq(config.mode)) {
            std::vector<double> dq, th;
            for (const auto* c : ok) {
                dq.push_back(*c->dq);
                th.push_back(*c->theta_gumbel);
            }
            rows.push_back(aggregate_row("dq", q, dq));
            rows.push_back(aggregate_row("theta_gumbel", q, th));
            dq_mean = rows[rows.size() - 2].mean;
        }
        if (wants_ei(config.mode)) {
            std::vector<double> th, hq;
            std::vector<std::vector<double>> pk(static_cast<std::size_t>(config.K));
            for (const auto* c : ok) {
                th.push_back(c->ei->theta_hat);
                for (std::size_t k = 0; k < pk.size(); ++k) pk[k].push_back(c->ei->p_hat[k]);
                if (c->ei->theta_hat < 1.0) hq.push_back(hq_from_theta(c->ei->theta_hat, q));
            }
            rows.push_back(aggregate_row("theta_hat", q, th));
            theta_hat_mean = rows.back().mean;
            for (std::size_t k = 0; k < pk.size(); ++k) {
                rows.push_back(aggregate_row("p_hat_" + std::to_string(k), q, pk[k]));
            }
            if (!hq.empty()) rows.push_back(aggregate_row("hq", q, hq));
        }
        for (const auto& a : analytic) {
            if (a.q != q) continue;
            rows.push_back(a);
            if (config.mode != Mode::All) continue;
            if (a.kind == "theta_analytic" && theta_hat_mean) {
                CsvRow d = base("delta_theta_hat", q);
                d.run_count = static_cast<int>(ok.size());
                d.mean = *theta_hat_mean - a.mean;
                rows.push_back(d);
            }
            if (a.kind == "dq_analytic" && dq_mean) {
                CsvRow d = base("delta_dq", q);
                d.run_count = static_cast<int>(ok.size());
                d.mean = *dq_mean - a.mean;
                rows.push_back(d);
            }
        }
    }
    return rows;
}

std::string genericity_to_json(const GenericityReport& report, int indent) {
    auto witnesses = [](const std::vector<Witness>& ws) {
        json arr = json::array();
        for (const auto& w : ws) arr.push_back({{"x", w.x}, {"y", w.y}});
        return arr;
    };
    json j;
    j["sample_count"] = report.sample_count;
    j["k_max"] = report.k_max;
    j["h1"] = {{"violation_rate", report.h1_violation_rate}, {"witnesses", witnesses(report.h1_witnesses)}};
    json h2 = json::array();
    for (std::size_t k = 0; k < report.h2_violation_rate.size(); ++k) {
        h2.push_back({{"k", k + 1},
                      {"violation_rate", report.h2_violation_rate[k]},
                      {"witnesses", witnesses(report.h2_witnesses[k])}});
    }
    j["h2"] = h2;
    return j.dump(indent);
}

RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const std::string started = iso_now();
    const MapSystem system = config.make_system();
    const Observable obs = config.make_observable();

    RunSummary summary;
    std::vector<std::pair<int, int>> work;
    if (wants_simulation(config.mode)) {
        std::set<int> qs(config.q_list.begin(), config.q_list.end());
        for (int q : qs) {
            for (int r = 0; r < config.runs; ++r) work.emplace_back(q, r);
        }
    }

    int threads = options.threads >= 0 ? options.threads : config.threads;
    if (threads == 0) threads = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
    threads = std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::size_t>(work.size(), 1))));

    summary.cells.resize(work.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    std::exception_ptr crashed;
    auto worker = [&] {
        for (std::size_t i = next++; i < work.size(); i = next++) {
            try {
                summary.cells[i] = run_cell(config, system, obs, work[i].first, work[i].second);
            } catch (...) {
                std::lock_guard<std::mutex> lock(log_mutex);
                if (!crashed) crashed = std::current_exception();
                next = work.size();
                return;
            }
            if (!options.quiet) {
                std::lock_guard<std::mutex> lock(log_mutex);
                const auto& c = summary.cells[i];
                std::cerr << "[obsmatch] q=" << c.q << " run=" << c.run << (c.ok ? " ok" : " FAILED: " + c.message)
                          << '\n';
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (crashed) std::rethrow_exception(crashed);

    std::vector<CsvRow> rows;
    if (config.mode == Mode::Genericity || config.mode == Mode::All) {
        if (auto model = config.interval_model()) {
            summary.genericity = check_genericity(*model, config.genericity_samples, config.k_max, config.master_seed);
            write_text(resolve(options.out_dir, config.genericity_path), genericity_to_json(*summary.genericity));
            CsvRow r;
            r.kind = "h1_violation_rate";
            r.system = config.system;
            r.observable = obs.name();
            r.run_count = 1;
            r.mean = summary.genericity->h1_violation_rate;
            r.n_total = config.genericity_samples;
            r.block_size = config.block_size;
            r.quantile = config.quantile;
            r.K = config.K;
            r.seed = config.master_seed;
            rows.push_back(r);
            for (std::size_t k = 0; k < summary.genericity->h2_violation_rate.size(); ++k) {
                r.kind = "h2_violation_rate_" + std::to_string(k + 1);
                r.mean = summary.genericity->h2_violation_rate[k];
                rows.push_back(r);
            }
        }
    }
    if (config.mode != Mode::Genericity) {
        auto more = summarize(config, summary.cells);
        rows.insert(rows.end(), more.begin(), more.end());
    }
    summary.rows = rows;

    const auto csv_path = resolve(options.out_dir, config.csv_path);
    emit_results(summary.rows, csv_path.string());
    summary.csv_path = csv_path.string();

    summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest;
    manifest["tool"] = "obsmatch";
    manifest["version"] = version();
    manifest["config"] = json::parse(config_to_json(config));
    if (options.record_timestamps) {
        manifest["started_at"] = started;
        manifest["finished_at"] = iso_now();
        manifest["wall_time_seconds"] = summary.wall_seconds;
    }
    manifest["threads"] = threads;
    manifest["seed_rule"] = "trajectory j of run r uses xoshiro256** seeded by splitmix64(master_seed ^ r), "
                            "advanced by j jumps of 2^128";
    json cells = json::array();
    for (const auto& c : summary.cells) {
        json jc{{"q", c.q}, {"run", c.run}, {"stream_seed", c.stream_seed}, {"status", c.ok ? "ok" : "failed"}};
        if (!c.ok) jc["message"] = c.message;
        cells.push_back(jc);
    }
    manifest["cells"] = cells;
    manifest["outputs"] = {{"csv", summary.csv_path}};
    if (summary.genericity) manifest["outputs"]["genericity"] = resolve(options.out_dir, config.genericity_path).string();
    const auto manifest_path = resolve(options.out_dir, config.manifest_path);
    write_text(manifest_path, manifest.dump(2) + "\n");
    summary.manifest_path = manifest_path.string();
    return summary;
}

ExperimentConfig config_from_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorCode::Io, "cannot open manifest '" + manifest_path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        invalid("manifest", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("config")) invalid("manifest.config", "missing");
    return parse_config(j["config"].dump());
}

} // namespace obsmatch
