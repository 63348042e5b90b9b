#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>

#include "carfollow/errors.hpp"
#include "carfollow/ingest.hpp"
#include "carfollow/kinematics.hpp"
#include "carfollow/pipeline.hpp"
#include "carfollow/synth.hpp"
#include "carfollow/text.hpp"
#include "generators.hpp"

using namespace carfollow;
using namespace carfollow::pipeline;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("carfollow_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// 25 s drive with one braking manoeuvre
std::string short_scenario(const std::string& id, const std::string& group, std::uint64_t seed) {
  auto s = synth::default_scenario();
  s.drive_id = id;
  s.driver_group = ingest::DriverGroup::parse(group);
  s.seed = seed;
  s.lead.accel_segments = {{5, 0}, {4, -1}, {16, 0}};
  s.ego.accel_segments = {{7, 0}, {4, -1}, {14, 0}};
  return synth::format_scenario(s);
}

fs::path make_drive(const fs::path& root, const std::string& id, const std::string& group, std::uint64_t seed) {
  const auto scen = root / (id + ".scenario");
  text::write_file_atomic(scen, short_scenario(id, group, seed));
  PipelineConfig c;
  c.out = root / id;
  std::ostringstream log;
  REQUIRE(cmd_simulate(c, scen, log) == 0);
  return c.out;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(CARFOLLOW_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config text round-trips and validates") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto c = gen::config(rng);
    const auto text = format_config(c);
    CHECK(format_config(parse_config(text)) == text);
  }
  CHECK_THROWS_AS(parse_config("nope=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("rounds=ten\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("delta_s=sideways\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed=-3\n"), ConfigError);
  auto c = parse_config("# comment\nsmoothing_window=4\n");
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = parse_config("triangle_left=0.9\ntriangle_right=0.2\n");
  CHECK_THROWS_AS(validate(c), ConfigError);
  CHECK_NOTHROW(validate(PipelineConfig{}));
  CHECK(PipelineConfig{}.calibration_path() == fs::path("out") / "calibration.txt");
}

TEST_CASE("overrides are applied after the config file") {
  const auto dir = scratch("overrides");
  text::write_file_atomic(dir / "c.txt", "rounds=10\nalpha=0.01\n");
  const auto c = load_config(dir / "c.txt", {{"rounds", "20"}, {"workers", "3"}});
  CHECK(c.gbt.rounds == 20);
  CHECK(c.alpha == 0.01);
  CHECK(c.workers == 3);
  CHECK_FALSE(c.seed_set);
  CHECK(load_config({}, {{"seed", "9"}}).seed_set);
  CHECK_THROWS_AS(load_config(dir / "missing.txt", {}), ConfigError);
  CHECK_THROWS_AS(load_config({}, {{"workers", "0"}}), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("calibration records round-trip") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto r = gen::calibration(rng);
    CHECK(parse_calibration(format_calibration(r)) == r);
  }
  const auto text = format_calibration(gen::calibration(rng));
  CHECK_THROWS_AS(parse_calibration(text + "extra=1\n"), FormatError);
  CHECK_THROWS_AS(parse_calibration(text.substr(0, text.find("scale"))), FormatError);
}

TEST_CASE("datasets keep only complete rows") {
  kinematics::FollowingSeries s;
  s.t = {0, 1, 2};
  s.d = {10.0, 11.0, std::nullopt};
  s.v_rel = {1.0, 1.0, 1.0};
  s.a_ego = {0.5, 0.5, 0.5};
  s.a_lv = {std::nullopt, 0.2, 0.2};
  const auto ego = assemble_dataset({s}, TrainTarget::ego);
  CHECK(ego.rows() == 2);
  CHECK(ego.feature_names == std::vector<std::string>{"distance", "v_rel"});
  const auto lv = assemble_dataset({s}, TrainTarget::lv);
  CHECK(lv.rows() == 1);
  CHECK(lv.target[0] == 0.2);
  s.a_ego = {std::nullopt, std::nullopt, std::nullopt};
  CHECK_THROWS_AS(assemble_dataset({s}, TrainTarget::ego), SchemaError);
  CHECK(parse_target("lv") == TrainTarget::lv);
  CHECK_THROWS_AS(parse_target("both"), ConfigError);
}

TEST_CASE("parallel_for covers every index and reports the first failure") {
  std::vector<int> hit(100, 0);
  parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] += 1; });
  CHECK(std::count(hit.begin(), hit.end(), 1) == 100);
  try {
    parallel_for(10, 3, [](std::size_t i) {
      if (i == 3 || i == 7) throw DataError(std::to_string(i));
    });
    FAIL("no exception");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()) == "3");
  }
}

TEST_CASE("end to end on synthetic drives") {
  const auto root = scratch("e2e");
  const auto a = make_drive(root, "drive_a", "young_man_1", 1);
  const auto b = make_drive(root, "drive_b", "elderly_woman", 2);

  PipelineConfig c;
  c.drives = {a, b};
  c.out = root / "out";
  c.workers = 2;
  std::ostringstream log;
  REQUIRE(cmd_calibrate(c, log) == 0);
  CHECK(log.str().find("selected model: model 1") != std::string::npos);
  const auto cal = parse_calibration(text::read_file(c.calibration_path()));
  CHECK(cal.fit.scale == doctest::Approx(1).epsilon(0.02));
  CHECK(fs::exists(c.out / "quality_model_1.txt"));

  REQUIRE(cmd_extract(c, log) == 0);
  const auto series = kinematics::read_series(c.out / "drive_a" / "series.csv");
  CHECK(series.size() == 251);
  const auto truth = synth::parse_truth(text::read_file(a / "truth.csv"));
  double se = 0;
  for (std::size_t i = 0; i < series.size(); ++i) se += std::pow(*series.d[i] - truth[i].gap_m, 2);
  CHECK(std::sqrt(se / series.size()) < 0.1);

  const auto sa = (c.out / "drive_a" / "series.csv").string(), sb = (c.out / "drive_b" / "series.csv").string();
  std::ostringstream table;
  REQUIRE(cmd_groups(c, {"young_man_1=" + sa, "elderly_woman=" + sb}, table) == 0);
  CHECK(table.str().find("Elderly woman") != std::string::npos);
  CHECK(fs::exists(c.out / "density_young_man_1.csv"));
  CHECK(cmd_groups(c, {"young_man_1=" + sa}, table) == 2);
  CHECK(cmd_groups(c, {"../x=" + sa, "y=" + sb}, table) == 2);

  c.gbt.rounds = 20;
  REQUIRE(cmd_train(c, {sa, sb}, TrainTarget::lv, log) == 0);
  const auto model = gbt::read_model(c.out / "model_lv.txt");
  CHECK(model.trees.size() == 20);
  CHECK(text::read_file(c.out / "metrics_lv.txt").find("importance.a_ego=") != std::string::npos);

  SUBCASE("a corrupt depth map fails only its drive") {
    const auto bad = root / "drive_c";
    fs::copy(b, bad, fs::copy_options::recursive);
    auto manifest = ingest::read_manifest(bad / "manifest.txt");
    manifest.drive_id = "drive_c";
    ingest::write_manifest(bad / "manifest.txt", manifest);
    text::write_file_atomic(bad / "depth" / "f000100.dmap", "DMAP");
    PipelineConfig p = c;
    p.out = root / "partial";
    fs::create_directories(p.out);
    fs::copy_file(c.calibration_path(), p.calibration_path());
    p.drives = {a, bad};
    CHECK(cmd_extract(p, log) == 1);
    CHECK(fs::exists(p.out / "drive_a" / "series.csv"));
    CHECK_FALSE(fs::exists(p.out / "drive_c"));
    p.drives = {bad};
    CHECK(cmd_extract(p, log) == 2);
    // calibrate reads the same map: no outputs at all
    p.out = root / "badcal";
    p.calibration.clear();
    p.drives = {a, bad};
    text::write_file_atomic(bad / "depth" / "f000000.dmap", "junk");
    CHECK(cmd_calibrate(p, log) == 2);
    CHECK_FALSE(fs::exists(p.out));
  }
  SUBCASE("duplicate drive ids are rejected") {
    PipelineConfig p = c;
    p.drives = {a, a};
    CHECK(cmd_extract(p, log) == 2);
  }
  SUBCASE("simulate will not overwrite an arbitrary directory") {
    PipelineConfig p;
    p.out = root / "out";
    CHECK(cmd_simulate(p, {}, log) == 2);
    CHECK(fs::exists(root / "out" / "calibration.txt"));
  }
  fs::remove_all(root);
}

TEST_CASE("command line exit codes") {
  const auto root = scratch("cli");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("-D rounds=0 train x.csv") == 2);
  CHECK(run_cli("--out " + (root / "d").string() + " simulate") == 0);
  CHECK(fs::exists(root / "d" / "manifest.txt"));
  CHECK(run_cli("simulate --out " + (root / "e").string() + " --seed 4") == 0);  // options after the subcommand
  CHECK(fs::exists(root / "e" / "manifest.txt"));
  CHECK(run_cli("-D drives=" + (root / "d").string() + " --out " + (root / "o").string() + " calibrate") == 0);
  CHECK(run_cli("-D drives=" + (root / "missing").string() + " --out " + (root / "o").string() + " extract") == 2);
  CHECK(run_cli("--config " + (root / "none.txt").string() + " calibrate") == 2);
  fs::remove_all(root);
}
