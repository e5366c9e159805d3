#pragma once

// Pipeline orchestration and JSON serialisation. Needs nlohmann/json on the
// include path.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynreg/assumptions.hpp"
#include "dynreg/data.hpp"
#include "dynreg/inference.hpp"
#include "dynreg/lpcore.hpp"
#include "dynreg/matrices.hpp"
#include "dynreg/ordering.hpp"

namespace dynreg {

using json = nlohmann::ordered_json;

inline constexpr int kReportVersion = 1;
inline constexpr double kProjectionTolerance = 1e-6;

// "terminal" or "weights:w1,w2,..."
inline WelfareSpec parse_welfare(const std::string& text, int T) {
  if (text == "terminal") return WelfareSpec::terminal(T);
  const std::string prefix = "weights:";
  if (text.rfind(prefix, 0) != 0) throw std::invalid_argument("welfare must be 'terminal' or 'weights:w1,...'");
  WelfareSpec w;
  std::stringstream ss(text.substr(prefix.size()));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      w.weights.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad welfare weight '" + item + "'");
    }
  }
  w.validate(T);
  return w;
}

inline std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad integer '" + item + "'");
    }
  }
  return out;
}

// Model structure shared by data files, p files and configs.
struct ModelShape {
  int periods = 2;
  bool markov = true;
  std::vector<bool> instrumented;  // empty: every period

  StateSpaceLayout layout() const {
    auto instr = instrumented;
    if (instr.empty()) instr.assign(static_cast<std::size_t>(periods), true);
    return StateSpaceLayout(Horizon(periods, instr), markov);
  }
};

inline ModelShape shape_of(const Dataset& ds, bool markov) {
  ModelShape s{ds.periods(), markov, {}};
  for (int t = 0; t < ds.periods(); ++t) s.instrumented.push_back(ds.has_z(t));
  return s;
}

// p file: the observed distribution with its row labels and, for estimates,
// the counts needed by the bootstrap.
inline json p_to_json(const EmpiricalDistribution& e, const ModelShape& shape) {
  json j;
  j["format"] = "dynreg-p";
  j["version"] = kReportVersion;
  j["periods"] = shape.periods;
  j["markov"] = shape.markov;
  j["instrumented"] = shape.layout().horizon().instrumented;
  j["p"] = e.p;
  std::vector<std::string> labels;
  for (const auto& l : e.labels) labels.push_back(l.str());
  j["labels"] = labels;
  if (e.has_counts()) {
    j["n"] = e.n;
    j["z_counts"] = e.z_counts;
    j["cell_counts"] = e.cell_counts;
  }
  return j;
}

struct LoadedP {
  ModelShape shape;
  EmpiricalDistribution dist;
};

inline LoadedP p_from_json(const json& j) {
  try {
    if (j.value("format", "") != "dynreg-p") throw DataError("not a p file (format tag missing)");
    LoadedP out;
    out.shape.periods = j.at("periods").get<int>();
    out.shape.markov = j.at("markov").get<bool>();
    out.shape.instrumented = j.at("instrumented").get<std::vector<bool>>();
    const auto layout = out.shape.layout();
    if (j.contains("cell_counts")) {
      EmpiricalDistribution e;
      e.cells_per_z = layout.cells_per_z();
      e.labels = b_row_labels(layout);
      e.z_counts = j.at("z_counts").get<std::vector<std::size_t>>();
      e.cell_counts = j.at("cell_counts").get<std::vector<std::size_t>>();
      e.n = j.at("n").get<std::size_t>();
      if (e.z_counts.size() != static_cast<std::size_t>(layout.z_count()) ||
          e.cell_counts.size() != e.z_counts.size() * static_cast<std::size_t>(e.cells_per_z))
        throw DimensionError("p file counts do not match the layout");
      detail::fill_from_counts(e);
      out.dist = std::move(e);
    } else {
      out.dist = distribution_from_p(j.at("p").get<std::vector<double>>(), layout);
    }
    return out;
  } catch (const json::exception& err) {
    throw DataError(std::string("malformed p file: ") + err.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& err) {
    throw DataError(path + ": " + err.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

struct InferenceRequest {
  double alpha = 0.05;
  std::size_t reps = 199;
  InferenceMode mode = InferenceMode::resolve;
  std::uint64_t seed = 1;
};

struct PipelineConfig {
  std::string data_path;  // CSV; one of data_path and p_path
  std::string p_path;
  ModelShape shape;       // used with CSV input; p files carry their own
  std::string assumptions;  // empty: K for a Markov layout, otherwise none
  std::string welfare = "terminal";
  double eps_sign = Tolerances{}.sign;
  bool project = false;
  std::vector<int> bound_regimes;  // empty: all
  std::size_t sort_cap = kDefaultSortCap;
  std::optional<InferenceRequest> inference;
  std::string out_path;
  std::string dot_path;
};

inline InferenceMode parse_mode(const std::string& s) {
  if (s == "vertex") return InferenceMode::vertex;
  if (s == "resolve") return InferenceMode::resolve;
  throw std::invalid_argument("mode must be 'vertex' or 'resolve'");
}

// Config file: a JSON object with the keys of PipelineConfig.
inline PipelineConfig pipeline_config_from_json(const json& j) {
  static const std::vector<std::string> known{"data", "p", "periods", "markov", "instrumented", "assumptions",
                                              "welfare", "eps_sign", "project", "bound_regimes", "sort_cap",
                                              "inference", "out", "dot"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("unknown config key '" + key + "'");
  try {
    PipelineConfig c;
    c.data_path = j.value("data", "");
    c.p_path = j.value("p", "");
    if (c.data_path.empty() == c.p_path.empty()) throw std::invalid_argument("config needs exactly one of 'data' and 'p'");
    c.shape.periods = j.value("periods", 2);
    c.shape.markov = j.value("markov", true);
    if (j.contains("instrumented")) c.shape.instrumented = j.at("instrumented").get<std::vector<bool>>();
    c.assumptions = j.value("assumptions", "");
    c.welfare = j.value("welfare", "terminal");
    c.eps_sign = j.value("eps_sign", c.eps_sign);
    c.project = j.value("project", false);
    if (j.contains("bound_regimes")) c.bound_regimes = j.at("bound_regimes").get<std::vector<int>>();
    c.sort_cap = j.value("sort_cap", c.sort_cap);
    if (j.contains("inference")) {
      const auto& ji = j.at("inference");
      InferenceRequest r;
      r.alpha = ji.value("alpha", r.alpha);
      r.reps = ji.value("reps", r.reps);
      r.mode = parse_mode(ji.value("mode", std::string("resolve")));
      r.seed = ji.value("seed", r.seed);
      c.inference = r;
    }
    c.out_path = j.value("out", "");
    c.dot_path = j.value("dot", "");
    return c;
  } catch (const json::exception& err) {
    throw std::invalid_argument(std::string("bad config: ") + err.what());
  }
}

inline json matrix_json(const std::vector<double>& m, int K) {
  json rows = json::array();
  for (int a = 0; a < K; ++a)
    rows.push_back(std::vector<double>(m.begin() + a * K, m.begin() + (a + 1) * K));
  return rows;
}

inline std::vector<std::string> regime_labels(const Horizon& h) {
  std::vector<std::string> out;
  for (const auto& r : enumerate_regimes(h)) out.push_back(describe(r));
  return out;
}

inline json confidence_set_json(const ConfidenceSet& cs) {
  json j;
  j["alpha"] = cs.alpha;
  j["mode"] = to_string(cs.mode);
  j["reps"] = cs.reps;
  j["seed"] = cs.seed;
  j["noiseless"] = cs.noiseless;
  j["projected"] = cs.projected;
  j["survivors"] = cs.survivors;
  json steps = json::array();
  for (const auto& s : cs.steps)
    steps.push_back({{"eliminated", s.eliminated}, {"beaten_by", s.beaten_by}, {"statistic", s.statistic},
                     {"critical", s.critical}});
  j["steps"] = steps;
  return j;
}

struct PipelineResult {
  json report;
  std::string dot;
  bool refuted = false;
};

struct PipelineInputs {
  ModelShape shape;
  EmpiricalDistribution dist;
};

inline PipelineInputs load_inputs(const PipelineConfig& cfg) {
  if (!cfg.p_path.empty()) {
    auto lp = p_from_json(read_json_file(cfg.p_path));
    return {lp.shape, std::move(lp.dist)};
  }
  const auto ds = read_csv(cfg.data_path);
  ModelShape shape = cfg.shape;
  if (shape.instrumented.empty()) shape = shape_of(ds, cfg.shape.markov);
  if (ds.periods() != shape.periods)
    throw DataError("data has " + std::to_string(ds.periods()) + " periods, config asks for " +
                    std::to_string(shape.periods));
  return {shape, estimate_p(ds, shape.layout())};
}

// estimate or load p -> mask -> matrices -> pairwise LPs -> ordering ->
// bounds -> report. A model refuted by the data gives a report with status
// "refuted" rather than an exception.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, const PipelineInputs& in) {
  const auto layout = in.shape.layout();
  const auto welfare = parse_welfare(cfg.welfare, layout.periods());
  const std::string spec =
      !cfg.assumptions.empty() ? cfg.assumptions : (layout.markov() && layout.periods() > 1 ? "K" : "none");
  auto acfg = parse_assumptions(spec, layout);
  const auto directions = resolve_directions(acfg, in.dist, layout);
  const auto mask = build_mask(layout, acfg);
  const auto pm = apply_mask(build_problem(layout, welfare), mask.h);
  const int K = static_cast<int>(pm.regime_count());

  PipelineResult res;
  json& r = res.report;
  r["schema"] = "dynreg-report";
  r["version"] = kReportVersion;
  r["layout"] = {{"periods", layout.periods()},
                 {"markov", in.shape.markov},
                 {"instrumented", layout.horizon().instrumented},
                 {"d_q", layout.d_q()},
                 {"d_p", pm.d_p()},
                 {"regimes", K},
                 {"active_states", pm.n_cols()}};
  json dirs = json::array();
  for (const auto& d : directions)
    dirs.push_back({{"assumption", d.kind == MonotoneKind::treatment ? "M1" : "M2"},
                    {"period", d.t + 1},
                    {"cell", d.label},
                    {"direction", to_string(d.estimate.direction)},
                    {"contrast", d.estimate.contrast},
                    {"used", d.estimate.used},
                    {"warning", d.estimate.warning}});
  r["assumptions"] = {{"spec", spec}, {"detected_directions", dirs}};
  r["welfare"] = {{"weights", welfare.weights}};
  r["sample_size"] = in.dist.n;

  std::vector<double> p = in.dist.p;
  const auto fg = feasibility_gap(pm.B, p);
  bool projected = false;
  {
    LPSystem sys(pm.B, p);
    if (!sys.feasible()) {
      if (cfg.project || fg.gap <= kProjectionTolerance) {
        p = fg.projected;
        projected = true;
      } else {
        r["status"] = "refuted";
        r["feasibility"] = {{"gap", fg.gap}, {"projected", false}};
        r["message"] = "model refuted under assumptions: no admissible latent distribution reproduces p";
        res.refuted = true;
        return res;
      }
    }
  }
  r["status"] = "ok";
  r["feasibility"] = {{"gap", fg.gap}, {"projected", projected}};

  Tolerances tol;
  tol.sign = cfg.eps_sign;
  const auto g = compute_gaps(pm, p, tol);
  const auto po = build_partial_order(g, cfg.eps_sign);
  const auto labels = regime_labels(layout.horizon());
  json regs = json::array();
  for (int k = 1; k <= K; ++k) regs.push_back({{"index", k}, {"rule", labels[static_cast<std::size_t>(k - 1)]}});
  r["regimes"] = regs;
  r["gaps"] = {{"lower", matrix_json(g.L, K)}, {"upper", matrix_json(g.U, K)}};
  json edges = json::array();
  for (auto [a, b] : po.edges()) edges.push_back({a, b});
  r["edges"] = edges;
  r["identified_set"] = identified_set(po);
  r["tiers"] = nth_best_tiers(po);
  const auto sorts = topological_sorts(po, cfg.sort_cap);
  r["topological_sorts"] = {{"sorts", sorts.sorts}, {"truncated", sorts.truncated}};
  if (sorts.count_exact) r["topological_sorts"]["count"] = *sorts.count_exact;

  std::vector<int> wanted = cfg.bound_regimes;
  if (wanted.empty())
    for (int k = 1; k <= K; ++k) wanted.push_back(k);
  LPSystem sys(pm.B, p, tol);
  json wb = json::array();
  for (int k : wanted) {
    const auto b = welfare_bounds(pm, sys, {k});
    wb.push_back({{"regime", k}, {"lower", b.lower}, {"upper", b.upper}});
  }
  r["welfare_bounds"] = wb;
  r["solver"] = {{"lp_count", g.lp_count}, {"max_duality_gap", g.max_duality_gap}};

  if (cfg.inference) {
    CSOptions opt;
    opt.alpha = cfg.inference->alpha;
    opt.reps = cfg.inference->reps;
    opt.mode = cfg.inference->mode;
    opt.seed = cfg.inference->seed;
    opt.tol = tol;
    r["confidence_set"] = confidence_set_json(cs_procedure(pm, in.dist, opt));
  }
  res.dot = to_dot(po, labels);
  return res;
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg) { return run_pipeline(cfg, load_inputs(cfg)); }

}  // namespace dynreg
