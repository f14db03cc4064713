#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int cli(const std::string& args) {
    const std::string cmd = std::string(OBSMATCH_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path workdir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("obsmatch_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p;
}

const char* kTiny = R"({"system": {"name": "doubling", "params": {"jitter": 1e-12}}, "observable": "example_f",
  "q_list": [2, 3], "n_total": 100000, "block_size": 1000, "quantile": 0.999, "runs": 2, "master_seed": 3,
  "mode": "all", "genericity": {"samples": 200}})";

} // namespace

TEST_CASE("validate exit codes") {
    const fs::path dir = workdir("validate");
    CHECK(cli("validate " + std::string(OBSMATCH_CONFIGS) + "/desk/example_theta.json") == 0);
    CHECK(cli("validate " + write_config(dir, "bad.json", R"({"system": "doubling", "observable": "id",
      "runs": 0})").string()) == 1);
    CHECK(cli("validate " + (dir / "missing.json").string()) == 1);
    CHECK(cli("validate") == 1);
    CHECK(cli("frobnicate x.json") == 1);
    CHECK(cli("") == 1);
}

TEST_CASE("every shipped config validates") {
    for (const char* variant : {"desk", "paper"}) {
        for (const auto& entry : fs::directory_iterator(fs::path(OBSMATCH_CONFIGS) / variant)) {
            CHECK_MESSAGE(cli("validate --quiet " + entry.path().string()) == 0, entry.path().string());
        }
    }
}

TEST_CASE("run, rerun and replay give the same CSV") {
    const fs::path dir = workdir("run");
    const fs::path cfg = write_config(dir, "tiny.json", kTiny);
    REQUIRE(cli("run " + cfg.string() + " --out-dir " + (dir / "a").string() + " --threads 2 --quiet") == 0);
    REQUIRE(cli("run " + cfg.string() + " --out-dir " + (dir / "b").string() + " --threads 1") == 0);
    const std::string a = slurp(dir / "a" / "results.csv");
    CHECK(a.rfind("kind,system,observable,q,run_count,mean,std,n_total,block_size,quantile,K,seed\n", 0) == 0);
    CHECK(a == slurp(dir / "b" / "results.csv"));
    CHECK(fs::exists(dir / "a" / "manifest.json"));
    CHECK(fs::exists(dir / "a" / "genericity.json"));

    REQUIRE(cli("replay " + (dir / "a" / "manifest.json").string() + " --out-dir " + (dir / "r").string() +
                " --quiet") == 0);
    CHECK(slurp(dir / "r" / "results.csv") == a);
}

TEST_CASE("seed override") {
    const fs::path dir = workdir("seed");
    const fs::path cfg = write_config(dir, "tiny.json", kTiny);
    REQUIRE(cli("run " + cfg.string() + " --seed 12 --out-dir " + dir.string() + " --quiet") == 0);
    const std::string csv = slurp(dir / "results.csv");
    CHECK(csv.find(",12\n") != std::string::npos);
    CHECK(csv.find(",3\n") == std::string::npos);
}

TEST_CASE("analytic and genericity subcommands") {
    const fs::path dir = workdir("oracles");
    REQUIRE(cli("analytic " + std::string(OBSMATCH_CONFIGS) + "/desk/example_theta.json --out-dir " + dir.string() +
                " --quiet") == 0);
    const std::string csv = slurp(dir / "results.csv");
    CHECK(csv.find("theta_analytic,doubling,example_f,5,1,0.99129") != std::string::npos);
    CHECK(csv.find("theta_hat") == std::string::npos);

    REQUIRE(cli("genericity " + std::string(OBSMATCH_CONFIGS) + "/desk/doubling_self_genericity.json --out-dir " +
                dir.string() + " --quiet") == 0);
    CHECK(slurp(dir / "results.csv").find("h1_violation_rate,doubling,doubling_map,0,1,1,") != std::string::npos);
    CHECK(slurp(dir / "genericity.json").find("witnesses") != std::string::npos);

    CHECK(cli("genericity " + std::string(OBSMATCH_CONFIGS) + "/desk/henon_fig3_f1.json --out-dir " +
              dir.string() + " --quiet") == 1);
}

TEST_CASE("runtime failures exit with 2") {
    const fs::path dir = workdir("fail");
    // Two blocks cannot support a Gumbel fit.
    const fs::path cfg = write_config(dir, "short.json", R"({"system": "doubling", "observable": "id",
      "n_total": 2000, "block_size": 1000, "runs": 2, "mode": "estimate_dq"})");
    CHECK(cli("run " + cfg.string() + " --out-dir " + dir.string() + " --quiet") == 2);
}
