#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pgdrecon/cli.hpp"
#include "pgdrecon/convnet.hpp"
#include "pgdrecon/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pgdrecon;

namespace {

const fs::path& work() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "pgdrecon_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(PGDRECON_BIN) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string without_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string out;
  for (std::string line; std::getline(in, line);) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

std::string p(const std::string& name) { return (work() / name).string(); }

// Small shared dataset: 200 train / 4 test at 32x32.
const std::string& small_dataset() {
  static const std::string ds = [] {
    REQUIRE(run("phantom-gen --out " + p("small") + " --n-train 200 --n-test 4 --seed 5") == 0);
    return p("small");
  }();
  return ds;
}

const std::string& small_model() {
  static const std::string m = [] {
    REQUIRE(run("train-projector --dataset " + small_dataset() + " --out " + p("model") +
                " --t1 8 --t2 4 --t3 2 --train-seed 1") == 0);
    return p("model");
  }();
  return m;
}

}  // namespace

TEST_CASE("phantom-gen writes the split and is reproducible") {
  REQUIRE(run("phantom-gen --out " + p("ds1") + " --seed 3") == 0);
  REQUIRE(run("phantom-gen --out " + p("ds2") + " --seed 3") == 0);
  CHECK(count_files(work() / "ds1/phantoms/train", ".f64") == 475);
  CHECK(count_files(work() / "ds1/phantoms/test", ".f64") == 25);
  const json m = io::read_json(work() / "ds1/phantoms/manifest.json");
  CHECK(m["train"].size() == 475);
  CHECK(m["test"].size() == 25);
  for (const char* f : {"phantoms/manifest.json", "phantoms/train/0000.f64", "phantoms/train/0474.f64",
                        "phantoms/test/0024.f64", "phantoms/test/0024.f64.json"}) {
    CHECK(slurp(work() / "ds1" / f) == slurp(work() / "ds2" / f));
  }
  REQUIRE(run("phantom-gen --out " + p("ds3") + " --seed 4 --n-train 2 --n-test 1") == 0);
  CHECK(slurp(work() / "ds1/phantoms/test/0000.f64") != slurp(work() / "ds3/phantoms/test/0000.f64"));
}

TEST_CASE("validation errors exit with code 2") {
  CHECK(run("phantom-gen --out " + p("bad") + " --size 4") == 2);
  CHECK(run("phantom-gen") == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("phantom-gen --out " + p("bad") + " --no-such-flag 1") == 2);
  std::ofstream(work() / "bad.json") << R"({"solver": {"gama_factors": [1.0]}})";
  CHECK(run("reconstruct --config " + p("bad.json") + " --out " + p("bad")) == 2);
  std::ofstream(work() / "broken.json") << "{ not json";
  CHECK(run("reconstruct --config " + p("broken.json") + " --out " + p("bad")) == 2);
  CHECK(run("reconstruct --dataset " + small_dataset() + " --out " + p("bad") +
            " --method rpgd --model " + p("missing/projector.model")) == 2);
  CHECK(run("reconstruct --dataset " + p("nowhere") + " --out " + p("bad")) == 2);
  CHECK(run("--help") == 0);
}

TEST_CASE("config file values are overridden by flags") {
  std::ofstream(work() / "cfg.json") << R"({"data": {"n_train": 3, "n_test": 2}, "seed": 9})";
  REQUIRE(run("phantom-gen --config " + p("cfg.json") + " --out " + p("cfgds") + " --n-test 1") == 0);
  CHECK(count_files(work() / "cfgds/phantoms/train", ".f64") == 3);
  CHECK(count_files(work() / "cfgds/phantoms/test", ".f64") == 1);
  CHECK(io::read_json(work() / "cfgds/phantoms/manifest.json")["seed"] == 9);
}

TEST_CASE("config json round trip") {
  cli::ExperimentConfig c;
  c.geometry.snr_db = 40.0;
  c.tv.lambda = 0.5;
  c.solver.gamma_factors = {1.0, 1.5};
  const auto back = cli::ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  const auto inf = cli::ExperimentConfig::from_json({{"geometry", {{"snr_db", "inf"}}}});
  CHECK_FALSE(inf.geometry.snr_db.has_value());
  CHECK_THROWS_AS(cli::ExperimentConfig::from_json({{"nope", 1}}), ConfigError);
  CHECK_THROWS_AS(cli::method_from_string("sirt"), ConfigError);
}

TEST_CASE("train-projector writes both checkpoints and a curve") {
  const auto& m = small_model();
  CHECK(fs::exists(fs::path(m) / "regressor.model"));
  CHECK(fs::exists(fs::path(m) / "projector.model"));
  const std::string curve = slurp(fs::path(m) / "training_curve.csv");
  std::size_t rows = 0;
  for (char ch : curve) rows += ch == '\n';
  CHECK(rows == 1 + 8 + 4 + 2);
  const json summary = io::read_json(fs::path(m) / "training_summary.json");
  CHECK(summary.contains("idempotence_defect"));
  CHECK(summary.contains("config"));

  // Same command into the same directory: every byte must match.
  const std::string proj = slurp(fs::path(m) / "projector.model");
  const std::string reg = slurp(fs::path(m) / "regressor.model");
  const std::string curve_before = without_last_column(slurp(fs::path(m) / "training_curve.csv"));
  REQUIRE(run("train-projector --dataset " + small_dataset() + " --out " + m +
              " --t1 8 --t2 4 --t3 2 --train-seed 1") == 0);
  CHECK(slurp(fs::path(m) / "projector.model") == proj);
  CHECK(slurp(fs::path(m) / "regressor.model") == reg);
  // The last column is wall-clock time.
  CHECK(without_last_column(slurp(fs::path(m) / "training_curve.csv")) == curve_before);
}

TEST_CASE("resume runs only stages 2 and 3") {
  REQUIRE(run("train-projector --dataset " + small_dataset() + " --out " + p("resumed") +
              " --resume " + small_model() + "/regressor.model --t2 2 --t3 1 --noise-snr 40") == 0);
  const std::string curve = slurp(work() / "resumed/training_curve.csv");
  CHECK(curve.find("\n1,") == std::string::npos);
  CHECK(curve.find("\n2,") != std::string::npos);
  // The stage-1 weights are carried over unchanged.
  const auto resumed = load_model(work() / "resumed/regressor.model");
  const auto original = load_model(fs::path(small_model()) / "regressor.model");
  CHECK(resumed.params.theta == original.params.theta);
}

TEST_CASE("reconstruct fbp reports per-image and mean metrics") {
  REQUIRE(run("reconstruct --dataset " + small_dataset() + " --out " + p("fbp") + " --method fbp") == 0);
  const json r = io::read_json(work() / "fbp/report.json");
  CHECK(r["metrics"]["per_image"].size() == 4);
  CHECK(r["metrics"]["regressed_snr_db"].is_number());
  CHECK(r["config"]["method"] == "fbp");
  CHECK(r["snr_label"] == "inf");
  CHECK(count_files(work() / "fbp/recon", ".pgm") == 4);
  REQUIRE(run("reconstruct --dataset " + small_dataset() + " --out " + p("fbp2") + " --method fbp") == 0);
  CHECK(slurp(work() / "fbp/report.csv") == slurp(work() / "fbp2/report.csv"));
  CHECK(slurp(work() / "fbp/recon/0003.f64") == slurp(work() / "fbp2/recon/0003.f64"));
}

TEST_CASE("simulate then reconstruct from stored sinograms") {
  REQUIRE(run("simulate --dataset " + small_dataset() + " --out " + p("sim") + " --snr 40") == 0);
  CHECK(fs::exists(work() / "sim/test/0003.sino.f64"));
  CHECK(fs::exists(work() / "sim/test/0003.clean.f64"));
  const json side = io::read_json(work() / "sim/test/0000.sino.f64.json");
  CHECK(io::number_from_json(side["realized_snr_db"]) == doctest::Approx(40.0).epsilon(1e-12));
  REQUIRE(run("reconstruct --dataset " + small_dataset() + " --sinograms " + p("sim") + " --out " +
              p("fbp40") + " --method fbp --snr 40") == 0);
  REQUIRE(run("reconstruct --dataset " + small_dataset() + " --out " + p("fbp40b") +
              " --method fbp --snr 40") == 0);
  CHECK(slurp(work() / "fbp40/recon/0000.f64") == slurp(work() / "fbp40b/recon/0000.f64"));
}

TEST_CASE("rpgd traces have a non-increasing alpha") {
  REQUIRE(run("reconstruct --dataset " + small_dataset() + " --out " + p("rpgd") + " --method rpgd --model " +
              small_model() + "/projector.model --c 0.99 --max-iter 40") == 0);
  for (int i = 0; i < 4; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "rpgd/traces/%04d.csv", i);
    std::istringstream in(slurp(work() / name));
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("k,step_norm,z_gap,alpha", 0) == 0);
    double prev = 1.0;
    int rows = 0;
    while (std::getline(in, line)) {
      std::vector<std::string> cols;
      std::stringstream ls(line);
      for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
      const double alpha = std::stod(cols.at(3));
      CHECK(alpha > 0.0);
      CHECK(alpha <= prev);
      prev = alpha;
      ++rows;
    }
    CHECK(rows > 0);
  }
  const json r = io::read_json(work() / "rpgd/report.json");
  // Without --gamma-factors the relaxed rule 0.9 * 2 / lambda_max applies.
  CHECK(r["details"]["gamma_factor"].get<double>() == doctest::Approx(1.8));
}

TEST_CASE("tv records the chosen lambda per image") {
  REQUIRE(run("reconstruct --dataset " + small_dataset() + " --out " + p("tv") +
              " --method tv --tv-grid 20 --tv-iter 15") == 0);
  const json r = io::read_json(work() / "tv/report.json");
  REQUIRE(r["per_image_extra"].size() == 4);
  for (const auto& e : r["per_image_extra"]) CHECK(e["lambda"].get<double>() > 0.0);
}

TEST_CASE("evaluate and trace-export") {
  REQUIRE(run("reconstruct --dataset " + small_dataset() + " --out " + p("reg") + " --method regressor --model " +
              small_model() + "/regressor.model") == 0);
  REQUIRE(run("reconstruct --dataset " + small_dataset() + " --out " + p("rpgd_e") + " --method rpgd --model " +
              small_model() + "/projector.model --max-iter 20") == 0);
  REQUIRE(run("evaluate --dataset " + small_dataset() + " --out " + p("eval") + " --recon " + p("fbp") +
              " --recon " + p("reg") + " --recon " + p("fbp40")) == 0);
  const std::string table = slurp(work() / "eval/table.csv");
  CHECK(table.find("fbp") != std::string::npos);
  CHECK(table.find("regressor") != std::string::npos);
  CHECK(table.find("\n40,") != std::string::npos);
  CHECK(fs::exists(work() / "eval/table_sinogram.csv"));
  REQUIRE(run("trace-export --out " + p("traces") + " --recon " + p("rpgd_e")) == 0);
  CHECK(fs::exists(work() / "traces/mean_trace_rpgd_inf.csv"));
}
