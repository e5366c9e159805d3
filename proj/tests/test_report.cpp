#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dynreg/report.hpp"
#include "dynreg/simulate.hpp"
#include "support.hpp"

using namespace dynreg;
using Catch::Approx;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dynreg_test_" + name)).string();
}

const std::vector<double>& positive_p() {
  static const auto p = exact_p(preset("positive"), testing::t2k(), 300'000, 2);
  return p;
}

PipelineInputs positive_inputs() { return {ModelShape{2, true, {}}, distribution_from_p(positive_p(), testing::t2k())}; }

}  // namespace

TEST_CASE("welfare and list parsing") {
  CHECK(parse_welfare("terminal", 2).weights == std::vector<double>{0, 1});
  CHECK(parse_welfare("weights:0.5,0.5", 2).weights == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(parse_welfare("weights:1", 2), std::invalid_argument);
  CHECK_THROWS_AS(parse_welfare("weights:a,b", 2), std::invalid_argument);
  CHECK_THROWS_AS(parse_welfare("average", 2), std::invalid_argument);
  CHECK(parse_int_list("1,4,7") == std::vector<int>{1, 4, 7});
  CHECK_THROWS(parse_int_list("1,x"));
}

TEST_CASE("p files round trip") {
  const auto ds = sample_data(preset("no-z2"), 5000, 3);
  const auto shape = shape_of(ds, true);
  CHECK(shape.instrumented == std::vector<bool>{true, false});
  const auto e = estimate_p(ds, shape.layout());
  const auto back = p_from_json(json::parse(p_to_json(e, shape).dump()));
  CHECK(back.shape.instrumented == shape.instrumented);
  CHECK(back.dist.p == e.p);
  CHECK(back.dist.z_counts == e.z_counts);
  CHECK(back.dist.has_counts());

  const auto pop = p_from_json(p_to_json(distribution_from_p(positive_p(), testing::t2k()), {2, true, {}}));
  CHECK_FALSE(pop.dist.has_counts());
  CHECK(pop.dist.p == positive_p());
  CHECK_THROWS_AS(p_from_json(json{{"format", "other"}}), DataError);
  CHECK_THROWS_AS(p_from_json(json{{"format", "dynreg-p"}}), DataError);
}

TEST_CASE("pipeline on the positive preset") {
  PipelineConfig cfg;
  cfg.assumptions = "M1,M2,K";
  const auto res = run_pipeline(cfg, positive_inputs());
  const auto& r = res.report;
  CHECK(r["status"] == "ok");
  CHECK(r["layout"]["d_q"] == 65536);
  CHECK(r["layout"]["d_p"] == 60);
  CHECK(r["solver"]["lp_count"] == 56);
  const auto id = r["identified_set"].get<std::vector<int>>();
  const auto q = true_q(preset("positive"), testing::t2k(), 300'000, 2);
  const int best = optimal_regime_oracle(q, WelfareSpec::terminal(2), testing::t2k()).k;
  CHECK(std::find(id.begin(), id.end(), best) != id.end());
  CHECK_FALSE(r["edges"].empty());
  CHECK(r["welfare_bounds"].size() == 8);
  for (const auto& b : r["welfare_bounds"]) CHECK(b["lower"].get<double>() <= b["upper"].get<double>());
  CHECK(res.dot.rfind("digraph regimes {", 0) == 0);

  // identical inputs give identical bytes
  CHECK(run_pipeline(cfg, positive_inputs()).report.dump() == r.dump());

  // default assumptions on a Markov layout are K alone
  PipelineConfig plain;
  CHECK(run_pipeline(plain, positive_inputs()).report["assumptions"]["spec"] == "K");
}

TEST_CASE("refuted and projected distributions") {
  // a distribution violating first stage monotonicity everywhere
  const auto& L = testing::t1();
  std::vector<double> p(6, 0.0);
  p[b_row_index(0, L.cell_code(std::vector<int>{0}, std::vector<int>{1}), 4)] = 1.0;  // d=1 at z=0
  p[b_row_index(1, L.cell_code(std::vector<int>{0}, std::vector<int>{0}), 4)] = 1.0;  // d=0 at z=1
  PipelineInputs in{ModelShape{1, false, {}}, distribution_from_p(p, L)};
  PipelineConfig cfg;
  cfg.assumptions = "M1:up";
  const auto res = run_pipeline(cfg, in);
  CHECK(res.refuted);
  CHECK(res.report["status"] == "refuted");
  CHECK(res.report["feasibility"]["gap"].get<double>() > 0.5);

  cfg.project = true;
  const auto proj = run_pipeline(cfg, in);
  CHECK_FALSE(proj.refuted);
  CHECK(proj.report["feasibility"]["projected"] == true);
}

TEST_CASE("two periods without the Markov assumption are too large") {
  PipelineConfig cfg;
  cfg.p_path = temp_path("p.json");
  std::ofstream(cfg.p_path) << p_to_json(distribution_from_p(positive_p(), testing::t2k()), {2, true, {}}).dump();
  json j = read_json_file(cfg.p_path);
  j["markov"] = false;
  std::ofstream(cfg.p_path) << j.dump();
  try {
    run_pipeline(cfg);
    FAIL("no error");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("Markov") != std::string::npos);
  }
  std::filesystem::remove(cfg.p_path);
}

TEST_CASE("config files") {
  const auto c = pipeline_config_from_json(json::parse(
      R"({"data":"x.csv","assumptions":"M1,K","welfare":"weights:0.5,0.5","bound_regimes":[1,2],
          "inference":{"alpha":0.1,"reps":50,"mode":"vertex","seed":3},"out":"r.json"})"));
  CHECK(c.data_path == "x.csv");
  CHECK(c.bound_regimes == std::vector<int>{1, 2});
  REQUIRE(c.inference);
  CHECK(c.inference->mode == InferenceMode::vertex);
  CHECK(c.inference->reps == 50);
  CHECK_THROWS_AS(pipeline_config_from_json(json::parse(R"({"data":"x","p":"y"})")), std::invalid_argument);
  CHECK_THROWS_AS(pipeline_config_from_json(json::parse(R"({"data":"x","colour":1})")), std::invalid_argument);

  // a full run from files
  const auto csv = temp_path("data.csv");
  {
    std::mt19937_64 rng(4);
    std::ofstream out(csv);
    write_csv(sample_from_q(testing::dirichlet(16, rng), testing::t1(), 3000, 5), out);
  }
  PipelineConfig run;
  run.data_path = csv;
  run.shape = {1, false, {}};
  run.inference = InferenceRequest{0.05, 49, InferenceMode::vertex, 2};
  const auto res = run_pipeline(run);
  CHECK(res.report["status"] == "ok");
  CHECK(res.report["sample_size"] == 3000);
  CHECK_FALSE(res.report["confidence_set"]["survivors"].empty());
  std::filesystem::remove(csv);
}
