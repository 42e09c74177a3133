#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "kpsim/experiment.hpp"

using namespace kpsim;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const auto dir = fs::temp_directory_path() /
                   ("kpsim_exp_" + tag + "_" + std::to_string(counter++));
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig tiny_run_config(const fs::path& out) {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.instances = 2000;
  c.batch_size = 200;  // 10 batches
  c.minibatch_size = 32;
  c.model.vocab = 500;
  c.model.embedding_dim = 4;
  c.model.hidden = {8};
  c.workers = 2;
  c.adam.k = 4;
  c.out_dir = out.string();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("defaults validate cleanly and round-trip through json") {
  const auto c = ExperimentConfig::defaults();
  CHECK(c.validate().empty());
  const auto back = ExperimentConfig::from_json_text(c.to_json());
  CHECK(back.validate().empty());
  CHECK(back.to_json() == c.to_json());
}

TEST_CASE("validate reports named diagnostics") {
  auto c = ExperimentConfig::defaults();
  SUBCASE("k of zero") {
    c.adam.k = 0;
    const auto diags = c.validate();
    REQUIRE(!diags.empty());
    CHECK(diags[0].find("k") != std::string::npos);
  }
  SUBCASE("missing topology file") {
    c.topology_path = "/nonexistent/node.topo";
    const auto diags = c.validate();
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].find("topology") != std::string::npos);
  }
  SUBCASE("missing data file") {
    c.source = DataSource::File;
    c.data_path = "/nonexistent/data.tsv";
    CHECK(!c.validate().empty());
  }
  SUBCASE("malformed topology document") {
    const auto path = fs::temp_directory_path() / "kpsim_bad.topo";
    std::ofstream(path) << "device gpu 0\ndevice gpu 0\n";
    c.topology_path = path.string();
    const auto diags = c.validate();
    REQUIRE(!diags.empty());
    CHECK(diags[0].find("line 2") != std::string::npos);
    fs::remove(path);
  }
  SUBCASE("empty config text uses the defaults") {
    const auto parsed = ExperimentConfig::from_json_text("{}");
    CHECK(parsed.validate().empty());
    CHECK(parsed.adam.k == 8);
  }
  SUBCASE("unknown fields are rejected") {
    CHECK_THROWS_AS(ExperimentConfig::from_json_text("{\"worker\": 3}"),
                    ConfigError);
    CHECK_THROWS_AS(
        ExperimentConfig::from_json_text("{\"adam\": {\"beta3\": 0.1}}"),
        ConfigError);
  }
  SUBCASE("malformed json") {
    CHECK_THROWS_AS(ExperimentConfig::from_json_text("{"), ConfigError);
  }
}

TEST_CASE("run_experiment writes the four output files") {
  const auto out = temp_dir("run");
  const auto config = tiny_run_config(out);
  const auto result = run_experiment(config, nullptr);

  for (const char* name :
       {"trajectory.jsonl", "metrics.jsonl", "ledger.json", "summary.json"}) {
    CAPTURE(name);
    CHECK(fs::exists(out / name));
  }
  // files parse
  const auto report = LedgerReport::from_json(slurp(out / "ledger.json"));
  CHECK(report.total.count > 0);
  CHECK(result.minibatch_steps > 0);
  CHECK(result.merge_events == result.minibatch_steps / config.adam.k);

  SUBCASE("reruns are byte-identical on metrics files") {
    const auto out2 = temp_dir("rerun");
    auto config2 = config;
    config2.out_dir = out2.string();
    run_experiment(config2, nullptr);
    CHECK(slurp(out / "metrics.jsonl") == slurp(out2 / "metrics.jsonl"));
    CHECK(slurp(out / "trajectory.jsonl") == slurp(out2 / "trajectory.jsonl"));
    CHECK(slurp(out / "ledger.json") == slurp(out2 / "ledger.json"));
    fs::remove_all(out2);
  }
  SUBCASE("invalid config raises ConfigError") {
    auto bad = config;
    bad.adam.k = 0;
    CHECK_THROWS_AS(run_experiment(bad, nullptr), ConfigError);
  }
  fs::remove_all(out);
}

TEST_CASE("benchmark mode emits diagnostics") {
  const auto out = temp_dir("bench");
  auto config = ExperimentConfig::defaults();
  config.source = DataSource::Benchmark;
  config.benchmark_dim = 6;
  config.benchmark_steps = 300;
  config.workers = 2;
  config.adam.k = 4;
  config.adam.alpha = 0.05;
  config.out_dir = out.string();
  const auto result = run_experiment(config, nullptr);
  CHECK(result.final_metric_avg.has_value());
  CHECK(result.assumptions.has_value());
  CHECK(result.merge_events == 300 / 4);
  CHECK(fs::exists(out / "trajectory.jsonl"));
  fs::remove_all(out);
}

TEST_CASE("sweep_k emits per-k outputs and the ratio table") {
  const auto out = temp_dir("sweep");
  auto config = tiny_run_config(out / "sweep");
  config.instances = 1000;
  config.batch_size = 250;
  config.sweep_ks = {2, 4};
  const auto entries = sweep_k(config, nullptr);
  REQUIRE(entries.size() == 3);  // baseline k=1 added
  CHECK(entries[0].k == 1);
  CHECK(entries[0].total_ratio_vs_k1 == 1.0);
  CHECK(entries[1].total_ratio_vs_k1 <= 1.0);
  CHECK(entries[2].total_ratio_vs_k1 <= entries[1].total_ratio_vs_k1);
  CHECK(fs::exists(out / "sweep" / "sweep_summary.json"));
  CHECK(fs::exists(out / "sweep" / "k_1" / "metrics.jsonl"));
  CHECK(fs::exists(out / "sweep" / "k_4" / "metrics.jsonl"));
  fs::remove_all(out);
}

TEST_CASE("route_compare writes a report for the builtin node") {
  const auto out = temp_dir("routes");
  auto config = ExperimentConfig::defaults();
  config.out_dir = out.string();
  const double ratio = route_compare(config, 1 << 20, nullptr);
  CHECK(ratio < 1.0);
  CHECK(fs::exists(out / "route_report.json"));
  fs::remove_all(out);
}
