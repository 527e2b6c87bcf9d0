#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcirc/compiler.hpp"
#include "dcirc/errors.hpp"
#include "dcirc/evaluator.hpp"
#include "dcirc/io.hpp"
#include "dcirc/model.hpp"
#include "dcirc/normal_form.hpp"
#include "dcirc/oracle.hpp"

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitSizeCap = 3;

struct RunConfig {
  std::string diagram_path;
  std::vector<std::string> evidence;
  std::vector<std::string> forbid;
  std::vector<std::string> exclude;
  std::string heuristic = "minfill";
  std::string format = "human";
  std::string observe;
  std::string output_path;
  double tie_eps = 0.0;
  std::uint64_t strategy_cap = 1'000'000;
  std::uint64_t oracle_cap = 10'000'000;
  bool deterministic = false;
};

std::string human(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

dcirc::Heuristic parse_heuristic(const std::string& name) {
  if (name == "minfill" || name == "min-fill") return dcirc::Heuristic::MinFill;
  if (name == "mindegree" || name == "min-degree") return dcirc::Heuristic::MinDegree;
  if (name == "asgiven" || name == "as-given") return dcirc::Heuristic::AsGiven;
  throw dcirc::ParseError("unknown heuristic '" + name + "' (minfill|mindegree|asgiven)");
}

std::pair<int, int> parse_decision_alt(const dcirc::InfluenceDiagram& dg, const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw dcirc::ParseError("alternative spec '" + spec + "' is not of the form DECISION=alt");
  int d = dg.find_var(spec.substr(0, eq));
  if (d < 0 || dg.var(d).kind != dcirc::VarKind::Decision)
    throw dcirc::ParseError("'" + spec.substr(0, eq) + "' is not a decision");
  const auto& states = dg.var(d).states;
  auto it = std::find(states.begin(), states.end(), spec.substr(eq + 1));
  if (it == states.end())
    throw dcirc::ParseError("unknown alternative '" + spec.substr(eq + 1) + "' of '" +
                            dg.var(d).name + "'");
  return {d, static_cast<int>(it - states.begin())};
}

// "D=alt" forbids the alternative at every observation context;
// "D=alt@P1=s1,P2=s2" restricts to the matching contexts (unnamed parents
// range over all their states).
std::vector<dcirc::ForbiddenAlternative> parse_forbidden(const dcirc::InfluenceDiagram& dg,
                                                         const std::vector<std::string>& specs) {
  std::vector<dcirc::ForbiddenAlternative> out;
  for (const auto& spec : specs) {
    auto at = spec.find('@');
    auto [d, alt] = parse_decision_alt(dg, spec.substr(0, at));
    auto contexts = dg.parent_indexer(d);

    std::vector<int> fixed(contexts.vars().size(), -1);
    if (at != std::string::npos) {
      std::string rest = spec.substr(at + 1);
      std::size_t pos = 0;
      while (pos < rest.size()) {
        auto comma = rest.find(',', pos);
        std::string pair = rest.substr(pos, comma == std::string::npos ? comma : comma - pos);
        auto eq = pair.find('=');
        if (eq == std::string::npos)
          throw dcirc::ParseError("context '" + pair + "' is not of the form PARENT=state");
        int p = dg.find_var(pair.substr(0, eq));
        int slot = p < 0 ? -1 : contexts.position_of(p);
        if (slot < 0)
          throw dcirc::ParseError("'" + pair.substr(0, eq) + "' is not a parent of '" +
                                  dg.var(d).name + "'");
        const auto& states = dg.var(p).states;
        auto it = std::find(states.begin(), states.end(), pair.substr(eq + 1));
        if (it == states.end())
          throw dcirc::ParseError("unknown state '" + pair.substr(eq + 1) + "' of '" +
                                  dg.var(p).name + "'");
        fixed[static_cast<std::size_t>(slot)] = static_cast<int>(it - states.begin());
        pos = comma == std::string::npos ? rest.size() : comma + 1;
      }
    }
    for (std::size_t ctx = 0; ctx < contexts.size(); ++ctx) {
      auto states = contexts.decode(ctx);
      bool match = true;
      for (std::size_t i = 0; i < states.size(); ++i)
        if (fixed[i] >= 0 && fixed[i] != states[i]) match = false;
      if (match) out.push_back({d, ctx, alt});
    }
    if (contexts.size() == 0) out.push_back({d, 0, alt});
  }
  return out;
}

std::vector<dcirc::ExcludedAlternative> parse_excluded(const dcirc::InfluenceDiagram& dg,
                                                       const std::vector<std::string>& specs) {
  std::vector<dcirc::ExcludedAlternative> out;
  for (const auto& spec : specs) {
    auto [d, alt] = parse_decision_alt(dg, spec);
    out.push_back({d, alt});
  }
  return out;
}

json policy_to_json(const dcirc::InfluenceDiagram& dg, const dcirc::Policy& policy) {
  json out = json::array();
  for (const auto& table : policy.decisions) {
    json entry;
    entry["decision"] = dg.var(table.decision).name;
    json rows = json::array();
    auto contexts = dg.parent_indexer(table.decision);
    for (std::size_t ctx = 0; ctx < table.entries.size(); ++ctx) {
      json row;
      json context = json::object();
      auto states = contexts.decode(ctx);
      for (std::size_t i = 0; i < states.size(); ++i)
        context[dg.var(contexts.vars()[i]).name] =
            dg.var(contexts.vars()[i]).states[static_cast<std::size_t>(states[i])];
      row["context"] = context;
      row["choice"] = dg.var(table.decision).states[static_cast<std::size_t>(
          table.entries[ctx].alternative)];
      row["moot"] = table.entries[ctx].moot;
      rows.push_back(row);
    }
    entry["table"] = rows;
    out.push_back(entry);
  }
  return out;
}

void print_policy_human(std::ostream& os, const dcirc::InfluenceDiagram& dg,
                        const dcirc::Policy& policy) {
  for (const auto& table : policy.decisions) {
    auto contexts = dg.parent_indexer(table.decision);
    const auto& name = dg.var(table.decision).name;
    for (std::size_t ctx = 0; ctx < table.entries.size(); ++ctx) {
      os << "  " << name;
      if (!contexts.empty())
        os << " | " << describe_instantiation(dg, contexts.vars(), contexts.decode(ctx));
      os << " <- "
         << dg.var(table.decision).states[static_cast<std::size_t>(table.entries[ctx].alternative)];
      if (table.entries[ctx].moot) os << " (moot)";
      os << "\n";
    }
  }
}

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

int cmd_validate(const RunConfig& cfg) {
  auto dg = dcirc::load_diagram(cfg.diagram_path);
  auto report = dcirc::validate(dg);
  if (report.ok()) {
    std::cout << "valid\n";
    return kExitOk;
  }
  for (const auto& v : report.violations) std::cout << v << "\n";
  return kExitValidation;
}

int cmd_compile(const RunConfig& cfg, bool dump) {
  auto dg = dcirc::load_diagram(cfg.diagram_path);
  auto order = dcirc::constrained_order(dg, parse_heuristic(cfg.heuristic));
  auto circuit = dcirc::compile(dg, order);
  if (dump) {
    auto text = dcirc::export_graph(circuit);
    if (cfg.output_path.empty()) {
      std::cout << text;
    } else {
      std::ofstream out(cfg.output_path, std::ios::binary);
      if (!out) throw dcirc::Error("cannot write '" + cfg.output_path + "'");
      out << text;
      std::cout << "wrote " << cfg.output_path << "\n";
    }
    return kExitOk;
  }
  std::cout << "order:";
  for (int v : order.sequence) std::cout << " " << dg.var(v).name;
  std::cout << "\nwidth " << order.width << "\nnodes " << circuit.node_count() << "\nedges "
            << circuit.edge_count << "\n";
  return kExitOk;
}

int cmd_solve(const RunConfig& cfg) {
  auto t0 = Clock::now();
  auto dg = dcirc::load_diagram(cfg.diagram_path);
  dcirc::require_valid(dg);
  auto evidence = dcirc::parse_evidence(dg, cfg.evidence);

  auto t_compile = Clock::now();
  auto order = dcirc::constrained_order(dg, parse_heuristic(cfg.heuristic));
  auto circuit = dcirc::compile(dg, order);
  double compile_ms = ms_since(t_compile);

  dcirc::EvalOptions options;
  options.forbidden = parse_forbidden(dg, cfg.forbid);
  options.excluded = parse_excluded(dg, cfg.exclude);
  options.sweep.tie_rel_eps = cfg.tie_eps;

  auto t_eval = Clock::now();
  auto result = dcirc::evaluate(circuit, dg, evidence, options);
  double eval_ms = ms_since(t_eval);
  double total_ms = ms_since(t0);

  if (cfg.format == "structured") {
    json doc;
    doc["meu"] = result.meu;
    doc["p_evidence"] = result.prob_evidence;
    doc["policy"] = policy_to_json(dg, result.policy);
    doc["circuit"] = {{"nodes", circuit.node_count()},
                      {"edges", circuit.edge_count},
                      {"width", circuit.width}};
    doc["timings_ms"] = {{"compile", cfg.deterministic ? 0.0 : compile_ms},
                         {"evaluate", cfg.deterministic ? 0.0 : eval_ms},
                         {"total", cfg.deterministic ? 0.0 : total_ms}};
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << "MEU " << human(result.meu) << "\n";
    std::cout << "policy:\n";
    print_policy_human(std::cout, dg, result.policy);
    std::cout << "P(e) " << human(result.prob_evidence) << "\n";
    std::cout << "circuit: nodes " << circuit.node_count() << ", edges " << circuit.edge_count
              << ", width " << circuit.width << "\n";
    std::cout << "wall time " << human(cfg.deterministic ? 0.0 : total_ms) << " ms\n";
  }
  return kExitOk;
}

int cmd_solve_nf(const RunConfig& cfg) {
  auto t0 = Clock::now();
  auto dg = dcirc::load_diagram(cfg.diagram_path);
  dcirc::require_valid(dg);
  auto evidence = dcirc::parse_evidence(dg, cfg.evidence);

  dcirc::NormalFormOptions options;
  options.strategy_cap = cfg.strategy_cap;
  options.heuristic = parse_heuristic(cfg.heuristic);
  auto result = dcirc::solve_normal_form(dg, evidence, options);
  double total_ms = ms_since(t0);

  if (cfg.format == "structured") {
    json doc;
    doc["meu"] = result.meu;
    doc["p_evidence"] = result.prob_evidence;
    doc["strategy"] = result.strategy_id.value();
    doc["policy"] = policy_to_json(dg, result.policy);
    doc["timings_ms"] = {{"total", cfg.deterministic ? 0.0 : total_ms}};
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << "MEU " << human(result.meu) << "\n";
    std::cout << "strategy s" << result.strategy_id.value() << "\n";
    std::cout << "policy:\n";
    print_policy_human(std::cout, dg, result.policy);
    std::cout << "P(e) " << human(result.prob_evidence) << "\n";
    std::cout << "wall time " << human(cfg.deterministic ? 0.0 : total_ms) << " ms\n";
  }
  return kExitOk;
}

int cmd_oracle_check(const RunConfig& cfg) {
  auto dg = dcirc::load_diagram(cfg.diagram_path);
  dcirc::require_valid(dg);
  auto evidence = dcirc::parse_evidence(dg, cfg.evidence);

  auto order = dcirc::constrained_order(dg, parse_heuristic(cfg.heuristic));
  auto circuit = dcirc::compile(dg, order);
  auto dc = dcirc::evaluate(circuit, dg, evidence);

  dcirc::NormalFormOptions nf_options;
  nf_options.strategy_cap = cfg.strategy_cap;
  auto nf = dcirc::solve_normal_form(dg, evidence, nf_options);

  dcirc::OracleOptions oracle_options;
  oracle_options.instantiation_cap = cfg.oracle_cap;
  auto oracle = dcirc::oracle_meu(dg, evidence, oracle_options);

  double deviation = std::max(std::abs(dc.meu - oracle.meu), std::abs(nf.meu - oracle.meu));
  if (cfg.format == "structured") {
    json doc;
    doc["decision_circuit_meu"] = dc.meu;
    doc["normal_form_meu"] = nf.meu;
    doc["oracle_meu"] = oracle.meu;
    doc["max_deviation"] = deviation;
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << "decision circuit MEU " << human(dc.meu) << "\n";
    std::cout << "normal form MEU      " << human(nf.meu) << "\n";
    std::cout << "oracle MEU           " << human(oracle.meu) << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1e", deviation);
    std::cout << "max deviation " << buf << "\n";
  }
  return kExitOk;
}

int cmd_voi(const RunConfig& cfg) {
  auto dg = dcirc::load_diagram(cfg.diagram_path);
  dcirc::require_valid(dg);
  auto evidence = dcirc::parse_evidence(dg, cfg.evidence);
  int observe = dg.find_var(cfg.observe);
  if (observe < 0) throw dcirc::ParseError("unknown variable '" + cfg.observe + "'");

  auto order = dcirc::constrained_order(dg, parse_heuristic(cfg.heuristic));
  auto circuit = dcirc::compile(dg, order);
  dcirc::EvalOptions options;
  options.forbidden = parse_forbidden(dg, cfg.forbid);
  options.excluded = parse_excluded(dg, cfg.exclude);
  auto result = dcirc::voi(circuit, dg, evidence, observe, options);

  if (cfg.format == "structured") {
    json doc;
    doc["voi"] = result.value;
    doc["base_meu"] = result.base_meu;
    json per_state = json::array();
    for (std::size_t x = 0; x < result.state_probability.size(); ++x) {
      per_state.push_back({{"state", dg.var(observe).states[x]},
                           {"probability", result.state_probability[x]},
                           {"meu", result.state_meu[x]}});
    }
    doc["per_state"] = per_state;
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << "VOI(" << dg.var(observe).name << ") " << human(result.value) << "\n";
    std::cout << "base MEU " << human(result.base_meu) << "\n";
    for (std::size_t x = 0; x < result.state_probability.size(); ++x) {
      std::cout << "  " << dg.var(observe).name << "=" << dg.var(observe).states[x] << ": P "
                << human(result.state_probability[x]) << ", MEU " << human(result.state_meu[x]);
      if (std::find(result.zero_probability_states.begin(), result.zero_probability_states.end(),
                    static_cast<int>(x)) != result.zero_probability_states.end())
        std::cout << " (zero-probability branch)";
      std::cout << "\n";
    }
  }
  return kExitOk;
}

int cmd_treewidth(const RunConfig& cfg) {
  auto dg = dcirc::load_diagram(cfg.diagram_path);
  auto rows = dcirc::treewidth_report(dg);
  if (cfg.format == "structured") {
    json doc = json::array();
    for (const auto& row : rows)
      doc.push_back({{"heuristic", dcirc::to_string(row.heuristic)},
                     {"width", row.width},
                     {"nodes", row.nodes},
                     {"edges", row.edges}});
    std::cout << doc.dump(2) << "\n";
  } else {
    std::printf("%-12s %6s %8s %8s\n", "heuristic", "width", "nodes", "edges");
    for (const auto& row : rows)
      std::printf("%-12s %6d %8zu %8zu\n", dcirc::to_string(row.heuristic), row.width, row.nodes,
                  row.edges);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dcirc: compile influence diagrams into decision circuits and evaluate them"};
  app.require_subcommand(1);

  RunConfig cfg;
  auto add_common = [&](CLI::App* sub, bool with_evidence = true) {
    sub->add_option("diagram", cfg.diagram_path, "diagram file (JSON)")->required();
    if (with_evidence)
      sub->add_option("-e,--evidence", cfg.evidence, "evidence VAR=state (repeatable)");
    sub->add_option("--heuristic", cfg.heuristic, "minfill|mindegree|asgiven");
    sub->add_option("--format", cfg.format, "human|structured");
    sub->add_flag("--deterministic", cfg.deterministic, "report timings as 0 for byte-stable output");
  };

  auto* validate = app.add_subcommand("validate", "check every diagram invariant");
  add_common(validate, false);

  auto* compile = app.add_subcommand("compile", "compile and report circuit statistics");
  add_common(compile, false);

  auto* solve = app.add_subcommand("solve", "decision-circuit MEU and optimal policies");
  add_common(solve);
  solve->add_option("--forbid", cfg.forbid, "forbid DECISION=alt[@P=s,...] (repeatable)");
  solve->add_option("--exclude", cfg.exclude, "exclude DECISION=alt everywhere (repeatable)");
  solve->add_option("--tie-eps", cfg.tie_eps, "relative epsilon for Max tie detection (default exact)");

  auto* solve_nf = app.add_subcommand("solve-nf", "normal-form MEU via a strategy variable");
  add_common(solve_nf);
  solve_nf->add_option("--cap", cfg.strategy_cap, "refuse when N_S exceeds this");

  auto* oracle_check = app.add_subcommand("oracle-check",
                                          "three-way comparison: circuit, normal form, oracle");
  add_common(oracle_check);
  oracle_check->add_option("--cap", cfg.strategy_cap, "normal-form strategy cap");
  oracle_check->add_option("--oracle-cap", cfg.oracle_cap, "oracle instantiation cap");

  auto* voi_cmd = app.add_subcommand("voi", "value of observing a variable before all decisions");
  add_common(voi_cmd);
  voi_cmd->add_option("--observe", cfg.observe, "chance variable to observe")->required();
  voi_cmd->add_option("--forbid", cfg.forbid, "forbid DECISION=alt[@P=s,...] (repeatable)");
  voi_cmd->add_option("--exclude", cfg.exclude, "exclude DECISION=alt everywhere (repeatable)");

  auto* dump = app.add_subcommand("dump-circuit", "deterministic textual circuit dump");
  add_common(dump, false);
  dump->add_option("-o,--output", cfg.output_path, "write the dump to a file");

  auto* treewidth = app.add_subcommand("treewidth", "width and circuit size per heuristic");
  add_common(treewidth, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(cfg);
    if (compile->parsed()) return cmd_compile(cfg, false);
    if (solve->parsed()) return cmd_solve(cfg);
    if (solve_nf->parsed()) return cmd_solve_nf(cfg);
    if (oracle_check->parsed()) return cmd_oracle_check(cfg);
    if (voi_cmd->parsed()) return cmd_voi(cfg);
    if (dump->parsed()) return cmd_compile(cfg, true);
    if (treewidth->parsed()) return cmd_treewidth(cfg);
  } catch (const dcirc::SizeCapError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSizeCap;
  } catch (const dcirc::EvidenceImpossibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const dcirc::InfeasibleDecisionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const dcirc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
