// dynreg command-line interface.
//
// Exit codes: 0 success, 1 unexpected failure, 2 usage or configuration
// error, 3 model refuted by the data, 4 problem too large, 5 bad data.

#include <CLI11.hpp>

#include <iostream>

#include "dynreg/report.hpp"
#include "dynreg/simulate.hpp"

using namespace dynreg;

namespace {

enum Exit { ok = 0, failure = 1, usage = 2, refuted = 3, too_large = 4, bad_data = 5 };

void emit(const json& j, const std::string& path) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty()) std::cout << text;
  else write_text_file(path, text);
}

int finish(const PipelineResult& res, const std::string& out, const std::string& dot) {
  emit(res.report, out);
  if (res.refuted) {
    std::cerr << "model refuted under assumptions (L1 gap " << res.report["feasibility"]["gap"].get<double>()
              << "); rerun with --project to order the projected distribution\n";
    return refuted;
  }
  if (!dot.empty()) write_text_file(dot, res.dot);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sharp ordering of dynamic treatment regimes from binary panel data"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw a dataset from a preset data generating process");
  std::string preset_name = "positive", sim_out, sim_p;
  std::size_t sim_n = 10000, sim_draws = kDefaultTrueQDraws;
  std::uint64_t sim_seed = 1;
  sim->add_option("--preset", preset_name, "positive, neg-mu22 or no-z2")
      ->check(CLI::IsMember({"positive", "neg-mu22", "no-z2"}));
  sim->add_option("--n", sim_n, "rows");
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_option("--out", sim_out, "CSV output")->required();
  sim->add_option("--exact-p", sim_p, "also write the population p to this file");
  sim->add_option("--draws", sim_draws, "Monte Carlo draws for the population p");

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate p from a CSV dataset");
  std::string est_in, est_out;
  bool non_markov = false;
  est->add_option("--in", est_in, "CSV input")->required();
  est->add_option("--out", est_out, "p file output");
  est->add_flag("--non-markov", non_markov, "full-history response maps");

  // order
  auto* ord = app.add_subcommand("order", "partial order of regimes, identified set, bounds");
  PipelineConfig oc;
  std::string ord_dot, ord_out;
  auto* ord_p = ord->add_option("--p", oc.p_path, "p file");
  auto* ord_in = ord->add_option("--in", oc.data_path, "CSV input");
  ord_p->excludes(ord_in);
  ord->add_option("--assumptions", oc.assumptions, "comma list of M1[:dir], M2[:dir], L-long, L-short, K, none (default: K when Markov)");
  ord->add_option("--welfare", oc.welfare, "terminal or weights:w1,w2");
  ord->add_option("--eps-sign", oc.eps_sign, "a lower bound above this is positive");
  ord->add_option("--out", ord_out, "report output");
  ord->add_option("--dot", ord_dot, "Graphviz output");
  ord->add_flag("--project", oc.project, "project an infeasible p onto the model before ordering");
  ord->add_option("--sort-cap", oc.sort_cap, "topological sorts listed");
  ord->add_flag("--non-markov", non_markov, "full-history response maps (CSV input)");

  // bounds
  auto* bnd = app.add_subcommand("bounds", "welfare bounds for chosen regimes");
  PipelineConfig bc;
  std::string bnd_regimes, bnd_out;
  bnd->add_option("--p", bc.p_path, "p file")->required();
  bnd->add_option("--regimes", bnd_regimes, "comma list of regime indices");
  bnd->add_option("--assumptions", bc.assumptions, "as for order");
  bnd->add_option("--welfare", bc.welfare, "terminal or weights:w1,w2");
  bnd->add_option("--out", bnd_out, "output");

  // infer
  auto* inf = app.add_subcommand("infer", "bootstrap confidence set for the optimal regime");
  PipelineConfig ic;
  InferenceRequest req;
  std::string inf_mode = "resolve", inf_out;
  inf->add_option("--in", ic.data_path, "CSV input")->required();
  inf->add_option("--alpha", req.alpha, "level");
  inf->add_option("--reps", req.reps, "bootstrap replicates");
  inf->add_option("--mode", inf_mode, "vertex or resolve")->check(CLI::IsMember({"vertex", "resolve"}));
  inf->add_option("--seed", req.seed, "random seed");
  inf->add_option("--assumptions", ic.assumptions, "as for order");
  inf->add_option("--welfare", ic.welfare, "terminal or weights:w1,w2");
  inf->add_option("--out", inf_out, "output");
  inf->add_flag("--non-markov", non_markov, "full-history response maps");

  // run
  auto* run = app.add_subcommand("run", "run the pipeline described by a JSON config file");
  std::string config_path;
  run->add_option("--config", config_path, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    if (*sim) {
      const auto c = preset(preset_name);
      std::ofstream out(sim_out);
      if (!out) throw DataError("cannot write " + sim_out);
      write_csv(sample_data(c, sim_n, sim_seed), out);
      if (!sim_p.empty()) {
        const auto layout = c.layout();
        const auto p = exact_p(c, layout, sim_draws, sim_seed);
        ModelShape shape{2, true, layout.horizon().instrumented};
        emit(p_to_json(distribution_from_p(p, layout), shape), sim_p);
      }
      return ok;
    }
    if (*est) {
      const auto ds = read_csv(est_in);
      const auto shape = shape_of(ds, !non_markov);
      emit(p_to_json(estimate_p(ds, shape.layout()), shape), est_out);
      return ok;
    }
    if (*ord) {
      if (oc.p_path.empty() == oc.data_path.empty()) throw std::invalid_argument("order needs --p or --in");
      oc.shape.markov = !non_markov;
      return finish(run_pipeline(oc), ord_out, ord_dot);
    }
    if (*bnd) {
      if (!bnd_regimes.empty()) bc.bound_regimes = parse_int_list(bnd_regimes);
      auto res = run_pipeline(bc);
      if (!res.refuted) {
        json slim;
        for (const char* key : {"schema", "version", "status", "feasibility", "welfare", "welfare_bounds"})
          slim[key] = res.report[key];
        res.report = slim;
      }
      return finish(res, bnd_out, "");
    }
    if (*inf) {
      req.mode = parse_mode(inf_mode);
      ic.inference = req;
      // sampling noise routinely leaves p-hat outside the model; the
      // bootstrap works with projections, so the point ordering does too
      ic.project = true;
      ic.shape.markov = !non_markov;
      return finish(run_pipeline(ic), inf_out, "");
    }
    if (*run) {
      const auto cfg = pipeline_config_from_json(read_json_file(config_path));
      return finish(run_pipeline(cfg), cfg.out_path, cfg.dot_path);
    }
  } catch (const ModelRefutedError& e) {
    std::cerr << "model refuted: " << e.what() << "\n";
    return refuted;
  } catch (const DimensionError& e) {
    std::cerr << "problem too large: " << e.what() << "\n";
    return too_large;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return bad_data;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure;
  }
  return ok;
}
