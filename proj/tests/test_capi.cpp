#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "obsmatch/obsmatch.h"

TEST_CASE("version and status strings") {
    CHECK(std::string(om_version()) == "0.1.0");
    CHECK(std::string(om_status_string(OM_OK)) == "ok");
    CHECK(std::string(om_status_string(OM_ERR_VALIDATION)) == "validation error");
}

TEST_CASE("errors carry a status and a thread-local message") {
    om_system* sys = nullptr;
    CHECK(om_system_create("pendulum", nullptr, &sys) == OM_ERR_UNKNOWN_NAME);
    CHECK(sys == nullptr);
    CHECK(std::string(om_last_error()).find("pendulum") != std::string::npos);
    CHECK(om_system_create(nullptr, nullptr, &sys) == OM_ERR_INVALID_ARGUMENT);
    CHECK(om_system_create("henon", "{\"b\": \"x\"}", &sys) == OM_ERR_INVALID_ARGUMENT);
    REQUIRE(om_system_create("henon", "{\"b\": 0.2}", &sys) == OM_OK);
    CHECK(std::string(om_last_error()).empty());
    CHECK(om_system_dim(sys) == 2);
    om_system_destroy(sys);
    om_system_destroy(nullptr);
}

TEST_CASE("observables through the C interface") {
    om_observable* f = nullptr;
    REQUIRE(om_observable_create("fig1_f2", 2, &f) == OM_OK);
    const double x[2] = {0.1, 0.2};
    double y[2] = {0, 0};
    REQUIRE(om_observable_evaluate(f, x, y) == OM_OK);
    CHECK(y[0] == doctest::Approx(0.4));
    CHECK(y[1] == doctest::Approx(0.4));
    om_observable_destroy(f);

    om_observable* g = nullptr;
    REQUIRE(om_observable_create(R"({"branches": [{"domain": [0, 1], "affine": [-1, 1]}]})", 1, &g) == OM_OK);
    CHECK(om_observable_in_dim(g) == 1);
    om_observable_destroy(g);
    CHECK(om_observable_create("nope", 2, &g) == OM_ERR_UNKNOWN_NAME);
}

TEST_CASE("series generation, dump and estimators") {
    om_system* sys = nullptr;
    om_observable* f = nullptr;
    REQUIRE(om_system_create("doubling", "{\"jitter\": 1e-12}", &sys) == OM_OK);
    REQUIRE(om_observable_create("id", 1, &f) == OM_OK);
    om_series* s = nullptr;
    REQUIRE(om_series_generate(sys, f, 2, 500000, 1, 0, "sup", &s) == OM_OK);
    CHECK(om_series_length(s) == 500000);

    om_series* again = nullptr;
    REQUIRE(om_series_generate(sys, f, 2, 500000, 1, 0, nullptr, &again) == OM_OK);
    CHECK(std::vector<double>(om_series_data(s), om_series_data(s) + 500000) ==
          std::vector<double>(om_series_data(again), om_series_data(again) + 500000));
    om_series_destroy(again);

    const auto path = (std::filesystem::temp_directory_path() / "obsmatch_capi.bin").string();
    REQUIRE(om_series_dump(s, path.c_str()) == OM_OK);
    om_series* loaded = nullptr;
    REQUIRE(om_series_load(path.c_str(), &loaded) == OM_OK);
    CHECK(om_series_length(loaded) == 500000);
    CHECK(om_series_data(loaded)[123] == om_series_data(s)[123]);
    om_series_destroy(loaded);
    std::filesystem::remove(path);
    CHECK(om_series_load(path.c_str(), &loaded) == OM_ERR_IO);

    om_series* maxima = nullptr;
    REQUIRE(om_series_block_maxima(s, 5000, &maxima) == OM_OK);
    CHECK(om_series_length(maxima) == 100);
    om_gumbel fit{};
    REQUIRE(om_fit_gumbel(om_series_data(maxima), om_series_length(maxima), &fit) == OM_OK);
    double dq = 0.0;
    REQUIRE(om_dq_from_gumbel(&fit, 2, &dq) == OM_OK);
    CHECK(std::abs(dq - 1.0) < 0.25);
    double theta = 0.0;
    CHECK(om_theta_from_gumbel(&fit, 2, 5000, dq, &theta) == OM_OK);
    CHECK(theta > 0.0);
    CHECK(theta <= 1.0);
    om_series_destroy(maxima);

    om_ei ei{};
    double p_hat[5];
    REQUIRE(om_estimate_ei(om_series_data(s), om_series_length(s), 0.9995, 5, p_hat, &ei) == OM_OK);
    CHECK(std::abs(ei.theta_hat - 0.5) < 0.1);
    CHECK(ei.theta_hat == doctest::Approx(1.0 - p_hat[0] - p_hat[1] - p_hat[2] - p_hat[3] - p_hat[4]));
    CHECK(ei.exceedances > 100);

    const std::vector<double> flat(100, 1.0);
    CHECK(om_fit_gumbel(flat.data(), flat.size(), &fit) == OM_ERR_DEGENERATE_SAMPLE);
    double h = 0.0;
    CHECK(om_hq_from_theta(1.0, 2, &h) == OM_ERR_INFINITE_H);
    REQUIRE(om_hq_from_theta(0.5, 2, &h) == OM_OK);
    CHECK(h == doctest::Approx(std::log(2.0)));

    om_series_destroy(s);
    om_observable_destroy(f);
    om_system_destroy(sys);
}

TEST_CASE("analytic oracles through the C interface") {
    om_observable* f = nullptr;
    REQUIRE(om_observable_create("example_f", 1, &f) == OM_OK);
    om_interval_model* m = nullptr;
    REQUIRE(om_interval_model_doubling(f, &m) == OM_OK);
    double theta = 0.0;
    REQUIRE(om_theta_interval(m, 2, 0, &theta) == OM_OK);
    CHECK(std::abs(theta - 0.7) < 1e-6);
    double h1 = -1.0, h2[3] = {-1, -1, -1};
    REQUIRE(om_genericity(m, 1000, 3, 1, &h1, h2) == OM_OK);
    CHECK(h1 == 0.0);
    CHECK(h2[2] == 0.0);
    om_interval_model_destroy(m);
    om_observable_destroy(f);

    om_observable* g = nullptr;
    REQUIRE(om_observable_create("fig1_f2", 2, &g) == OM_OK);
    CHECK(om_interval_model_doubling(g, &m) == OM_ERR_MODEL);
    om_observable_destroy(g);

    const double w[3] = {0.5, 0.3, 0.2};
    double d2 = 0.0;
    REQUIRE(om_dq_self_similar(w, 3, 0.5, 2.0, &d2) == OM_OK);
    CHECK(d2 == doctest::Approx(1.3959).epsilon(1e-4));
    CHECK(om_dq_self_similar(w, 3, 0.5, 1.0, &d2) == OM_ERR_UNSUPPORTED_ORDER);
    double proj = 0.0;
    REQUIRE(om_hk_projection(2.06, 1, &proj) == OM_OK);
    CHECK(proj == 1.0);
}

TEST_CASE("experiments through the C interface") {
    om_experiment* exp = nullptr;
    CHECK(om_experiment_from_json(R"({"system": "doubling", "observable": "id", "runs": 0})", &exp) ==
          OM_ERR_VALIDATION);
    CHECK(std::string(om_last_error()).find("config.runs") != std::string::npos);

    REQUIRE(om_experiment_from_json(R"({"system": "doubling", "observable": "example_f", "q_list": [2, 3],
                                        "mode": "analytic"})",
                                    &exp) == OM_OK);
    char* csv = nullptr;
    CHECK(om_experiment_results_csv(exp, &csv) == OM_ERR_INVALID_ARGUMENT);
    REQUIRE(om_experiment_set_seed(exp, 9) == OM_OK);
    CHECK(om_experiment_set_mode(exp, "sideways") == OM_ERR_VALIDATION);
    const auto dir = std::filesystem::temp_directory_path() / "obsmatch_capi_exp";
    std::filesystem::remove_all(dir);
    REQUIRE(om_experiment_run(exp, dir.string().c_str(), 1, 1) == OM_OK);
    REQUIRE(om_experiment_results_csv(exp, &csv) == OM_OK);
    const std::string text(csv);
    om_string_free(csv);
    CHECK(text.find("theta_analytic,doubling,example_f,3,") != std::string::npos);
    CHECK(text.find(",9\n") != std::string::npos);
    CHECK(std::filesystem::exists(om_experiment_csv_path(exp)));
    CHECK(om_experiment_failed_cells(exp) == 0);

    om_experiment* replay = nullptr;
    REQUIRE(om_experiment_from_manifest(om_experiment_manifest_path(exp), &replay) == OM_OK);
    char* json = nullptr;
    REQUIRE(om_experiment_config_json(replay, &json) == OM_OK);
    CHECK(std::string(json).find("\"master_seed\": 9") != std::string::npos);
    om_string_free(json);
    om_experiment_destroy(replay);
    om_experiment_destroy(exp);
}
