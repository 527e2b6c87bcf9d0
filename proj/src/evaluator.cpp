#include "dcirc/evaluator.hpp"

#include <algorithm>
#include <cassert>
#include <set>

#include "dcirc/errors.hpp"

namespace dcirc {

namespace {

void check_evidence(const InfluenceDiagram& dg, const Evidence& evidence) {
  int utility = dg.utility_var();
  for (const auto& [var, state] : evidence.assignments) {
    if (var < 0 || var >= dg.var_count())
      throw AddressError("evidence names unknown variable id " + std::to_string(var));
    if (var == utility)
      throw ValidationError("evidence must not assign the utility node; U=1 is injected internally");
    if (dg.var(var).kind == VarKind::Decision)
      throw ValidationError("evidence must not assign decision '" + dg.var(var).name + "'");
    if (state < 0 || state >= dg.card(var))
      throw AddressError("evidence state out of range for '" + dg.var(var).name + "'");
  }
  auto responsive = assert_unresponsive(dg, evidence);
  if (!responsive.empty()) {
    std::string msg = "evidence is responsive to decisions:";
    for (int v : responsive) msg += " '" + dg.var(v).name + "'";
    throw ValidationError(msg);
  }
}

// Feasible alternatives per (decision, context) under the options; throws
// when some context has none.
std::vector<std::vector<std::vector<int>>> feasible_alternatives(const Circuit& circuit,
                                                                 const InfluenceDiagram& dg,
                                                                 const EvalOptions& options) {
  std::vector<std::vector<std::vector<int>>> feasible(circuit.decisions.size());
  for (std::size_t di = 0; di < circuit.decisions.size(); ++di) {
    int d = circuit.decisions[di].decision;
    int alts = dg.card(d);
    std::set<int> excluded;
    for (const auto& ex : options.excluded)
      if (ex.decision == d) excluded.insert(ex.alternative);

    auto contexts = circuit.decisions[di].max_node.size();
    feasible[di].resize(contexts);
    for (std::size_t ctx = 0; ctx < contexts; ++ctx) {
      for (int alt = 0; alt < alts; ++alt) {
        if (excluded.count(alt)) continue;
        bool banned = false;
        for (const auto& fb : options.forbidden)
          if (fb.decision == d && fb.context == ctx && fb.alternative == alt) banned = true;
        for (const auto& [var, addr] : circuit.default_zero) {
          auto flat = ctx * static_cast<std::size_t>(alts) + static_cast<std::size_t>(alt);
          if (var == d && static_cast<std::size_t>(addr) == flat) banned = true;
        }
        if (!banned) feasible[di][ctx].push_back(alt);
      }
      if (feasible[di][ctx].empty()) {
        auto parents = dg.parent_indexer(d);
        std::string where = parents.empty()
                                ? std::string("<empty>")
                                : describe_instantiation(dg, parents.vars(), parents.decode(ctx));
        throw InfeasibleDecisionError("every alternative of decision '" + dg.var(d).name +
                                      "' is forbidden at context {" + where + "}");
      }
    }
  }
  return feasible;
}

std::vector<std::pair<LeafRef, double>> option_overrides(const EvalOptions& options,
                                                         const InfluenceDiagram& dg) {
  std::vector<std::pair<LeafRef, double>> overrides;
  for (const auto& ex : options.excluded)
    overrides.push_back({{NodeKind::Indicator, ex.decision, ex.alternative}, 0.0});
  for (const auto& fb : options.forbidden) {
    auto flat = fb.context * static_cast<std::size_t>(dg.card(fb.decision)) +
                static_cast<std::size_t>(fb.alternative);
    overrides.push_back({{NodeKind::Parameter, fb.decision, static_cast<std::int32_t>(flat)}, 0.0});
  }
  return overrides;
}

void fill_derivatives(const Circuit& circuit, const InfluenceDiagram& dg, const SweepState& state,
                      EvaluationResult& result) {
  result.indicator_derivative.resize(static_cast<std::size_t>(dg.var_count()));
  result.parameter_derivative.resize(static_cast<std::size_t>(dg.var_count()));
  for (const auto& v : dg.variables) {
    auto& ind = result.indicator_derivative[static_cast<std::size_t>(v.id)];
    ind.assign(static_cast<std::size_t>(v.card()), 0.0);
    for (int s = 0; s < v.card(); ++s)
      ind[static_cast<std::size_t>(s)] = partial_wrt_indicator(circuit, state, v.id, s);
    auto family = dg.family_indexer(v.id);
    auto& par = result.parameter_derivative[static_cast<std::size_t>(v.id)];
    par.assign(family.size(), 0.0);
    for (std::size_t a = 0; a < family.size(); ++a)
      par[a] = partial_wrt_parameter(circuit, state, v.id, a);
  }
}

double evidence_probability(const Circuit& circuit, const SweepState& state, int utility) {
  // Retraction at U: the lambda_ubar derivative still contributes even
  // though the indicator itself is zero in e'.
  return partial_wrt_indicator(circuit, state, utility, 0) +
         partial_wrt_indicator(circuit, state, utility, 1);
}

}  // namespace

EvaluationResult evaluate(const Circuit& circuit, const InfluenceDiagram& dg,
                          const Evidence& evidence, const EvalOptions& options) {
  int utility = dg.utility_var();
  if (utility < 0) throw ValidationError("evaluate requires a diagram with a utility node");
  check_evidence(dg, evidence);
  auto feasible = feasible_alternatives(circuit, dg, options);

  Evidence prime = evidence;
  prime.assignments[utility] = 0;  // U = 1 is state 0 by convention

  auto leaves = set_leaves(circuit, dg, prime, option_overrides(options, dg));
  auto state = sweep_up(circuit, leaves, options.sweep);

  // Policy off the Max slots. Moot contexts (all children zero) take the
  // lowest feasible alternative; the argmax slot is redirected there so the
  // downward routing matches the reported policy.
  EvaluationResult result;
  for (std::size_t di = 0; di < circuit.decisions.size(); ++di) {
    const auto& contexts = circuit.decisions[di];
    Policy::Table table;
    table.decision = contexts.decision;
    table.entries.resize(contexts.max_node.size());
    for (std::size_t ctx = 0; ctx < contexts.max_node.size(); ++ctx) {
      std::int32_t m = contexts.max_node[ctx];
      assert(m >= 0);
      bool moot = state.value[static_cast<std::size_t>(m)] == 0.0;
      PolicyEntry entry;
      entry.moot = moot;
      if (moot) {
        entry.alternative = feasible[di][ctx].front();
        state.argmax_child[static_cast<std::size_t>(m)] = entry.alternative;
      } else {
        entry.alternative = state.argmax_child[static_cast<std::size_t>(m)];
      }
      assert(entry.alternative >= 0 &&
             entry.alternative <
                 static_cast<int>(circuit.nodes[static_cast<std::size_t>(m)].children.size()));
      table.entries[ctx] = entry;
    }
    result.policy.decisions.push_back(std::move(table));
  }

  sweep_down(circuit, state);

  result.root_value = state.value[static_cast<std::size_t>(circuit.root)];
  result.prob_evidence = evidence_probability(circuit, state, utility);
  if (result.prob_evidence <= 0.0)
    throw EvidenceImpossibleError("P(e) = 0: evidence impossible, MEU undefined");
  result.meu = result.root_value / result.prob_evidence;
  result.derivative_semantics = circuit.decisions.empty() ? "arithmetic" : "max-argmax";
  result.edge_visits_up = state.edge_visits_up;
  result.edge_visits_down = state.edge_visits_down;
  fill_derivatives(circuit, dg, state, result);
  return result;
}

EvaluationResult evaluate_zeroed(const Circuit& circuit, const InfluenceDiagram& dg,
                                 const Evidence& evidence, const Policy& policy,
                                 const EvalOptions& options) {
  int utility = dg.utility_var();
  if (utility < 0) throw ValidationError("evaluate requires a diagram with a utility node");
  check_evidence(dg, evidence);

  auto overrides = option_overrides(options, dg);
  for (const auto& contexts : circuit.decisions) {
    const auto* table = policy.find(contexts.decision);
    if (!table || table->entries.size() != contexts.max_node.size())
      throw AddressError("policy does not cover decision '" +
                         dg.var(contexts.decision).name + "'");
    int alts = dg.card(contexts.decision);
    for (std::size_t ctx = 0; ctx < table->entries.size(); ++ctx) {
      for (int alt = 0; alt < alts; ++alt) {
        if (alt == table->entries[ctx].alternative) continue;
        auto flat = ctx * static_cast<std::size_t>(alts) + static_cast<std::size_t>(alt);
        overrides.push_back(
            {{NodeKind::Parameter, contexts.decision, static_cast<std::int32_t>(flat)}, 0.0});
      }
    }
  }

  Evidence prime = evidence;
  prime.assignments[utility] = 0;
  auto leaves = set_leaves(circuit, dg, prime, overrides);
  auto state = sweep_up(circuit, leaves, options.sweep);

  // Route every Max along the policy choice; zeroing already made the other
  // children vanish, but moot contexts need the explicit redirect.
  for (const auto& contexts : circuit.decisions) {
    const auto* table = policy.find(contexts.decision);
    for (std::size_t ctx = 0; ctx < contexts.max_node.size(); ++ctx) {
      auto m = static_cast<std::size_t>(contexts.max_node[ctx]);
      state.argmax_child[m] = table->entries[ctx].alternative;
    }
  }
  sweep_down(circuit, state);

  EvaluationResult result;
  result.policy = policy;
  result.root_value = state.value[static_cast<std::size_t>(circuit.root)];
  result.prob_evidence = evidence_probability(circuit, state, utility);
  if (result.prob_evidence <= 0.0)
    throw EvidenceImpossibleError("P(e) = 0: evidence impossible, MEU undefined");
  result.meu = result.root_value / result.prob_evidence;
  result.derivative_semantics = "theta-zeroed";
  result.edge_visits_up = state.edge_visits_up;
  result.edge_visits_down = state.edge_visits_down;
  fill_derivatives(circuit, dg, state, result);
  return result;
}

VoiResult voi(const Circuit& circuit, const InfluenceDiagram& dg, const Evidence& base,
              int observation_var, const EvalOptions& options) {
  if (observation_var < 0 || observation_var >= dg.var_count() ||
      dg.var(observation_var).kind != VarKind::Chance)
    throw ValidationError("voi observation must be a chance variable");
  if (dg.decision_descendants()[static_cast<std::size_t>(observation_var)])
    throw ValidationError("voi observation '" + dg.var(observation_var).name +
                          "' is responsive to decisions");

  auto base_result = evaluate(circuit, dg, base, options);

  // Policy-free P(x, e): fix the optimal policy's parameters (any policy
  // gives the same probability for unresponsive variables) and sweep with
  // both utility indicators at 1.
  auto overrides = option_overrides(options, dg);
  for (const auto& table : base_result.policy.decisions) {
    int alts = dg.card(table.decision);
    for (std::size_t ctx = 0; ctx < table.entries.size(); ++ctx)
      for (int alt = 0; alt < alts; ++alt) {
        if (alt == table.entries[ctx].alternative) continue;
        auto flat = ctx * static_cast<std::size_t>(alts) + static_cast<std::size_t>(alt);
        overrides.push_back(
            {{NodeKind::Parameter, table.decision, static_cast<std::int32_t>(flat)}, 0.0});
      }
  }

  VoiResult out;
  out.base_meu = base_result.meu;
  int states = dg.card(observation_var);
  out.state_probability.assign(static_cast<std::size_t>(states), 0.0);
  out.state_meu.assign(static_cast<std::size_t>(states), 0.0);

  double expected = 0.0;
  for (int x = 0; x < states; ++x) {
    Evidence with_x = base;
    with_x.assignments[observation_var] = x;
    auto leaves = set_leaves(circuit, dg, with_x, overrides);
    auto state = sweep_up(circuit, leaves, options.sweep);
    double p_xe = state.value[static_cast<std::size_t>(circuit.root)];
    double p_x = p_xe / base_result.prob_evidence;
    out.state_probability[static_cast<std::size_t>(x)] = p_x;
    if (p_x <= 0.0) {
      out.zero_probability_states.push_back(x);
      continue;
    }
    auto branch = evaluate(circuit, dg, with_x, options);
    out.state_meu[static_cast<std::size_t>(x)] = branch.meu;
    expected += p_x * branch.meu;
  }
  out.value = expected - base_result.meu;
  return out;
}

InfluenceDiagram to_policy_diagram(const InfluenceDiagram& dg, const Policy& policy) {
  InfluenceDiagram out = dg;
  for (const auto& v : dg.variables) {
    if (v.kind != VarKind::Decision) continue;
    const auto* table = policy.find(v.id);
    if (!table) throw AddressError("policy does not cover decision '" + v.name + "'");
    auto contexts = dg.parent_indexer(v.id);
    if (table->entries.size() != contexts.size())
      throw AddressError("policy table for '" + v.name + "' has the wrong size");

    Cpt cpt;
    cpt.family.child = v.id;
    cpt.family.parents = dg.decision_parents[static_cast<std::size_t>(v.id)];
    cpt.table.assign(contexts.size() * static_cast<std::size_t>(v.card()), 0.0);
    for (std::size_t ctx = 0; ctx < contexts.size(); ++ctx) {
      auto chosen = static_cast<std::size_t>(table->entries[ctx].alternative);
      cpt.table[ctx * static_cast<std::size_t>(v.card()) + chosen] = 1.0;
    }
    out.variables[static_cast<std::size_t>(v.id)].kind = VarKind::Chance;
    out.cpts[static_cast<std::size_t>(v.id)] = std::move(cpt);
    out.decision_parents[static_cast<std::size_t>(v.id)].clear();
  }
  out.decision_order.clear();
  return out;
}

PolicyQueryResult query_policy_circuit(const Circuit& circuit, const InfluenceDiagram& policy_dg,
                                       const Evidence& evidence) {
  if (policy_dg.has_decisions())
    throw ValidationError("query_policy_circuit requires a policy diagram (no decisions)");
  auto leaves = set_leaves(circuit, policy_dg, evidence);
  auto state = sweep_up(circuit, leaves);
  sweep_down(circuit, state);

  PolicyQueryResult out;
  out.prob_evidence = state.value[static_cast<std::size_t>(circuit.root)];
  out.marginal.resize(static_cast<std::size_t>(policy_dg.var_count()));
  out.family_joint.resize(static_cast<std::size_t>(policy_dg.var_count()));
  for (const auto& v : policy_dg.variables) {
    auto& marg = out.marginal[static_cast<std::size_t>(v.id)];
    marg.assign(static_cast<std::size_t>(v.card()), 0.0);
    for (int x = 0; x < v.card(); ++x)
      marg[static_cast<std::size_t>(x)] = partial_wrt_indicator(circuit, state, v.id, x);

    auto family = policy_dg.family_indexer(v.id);
    auto& joint = out.family_joint[static_cast<std::size_t>(v.id)];
    joint.assign(family.size(), 0.0);
    const auto& cpt = policy_dg.cpts[static_cast<std::size_t>(v.id)];
    for (std::size_t a = 0; a < family.size(); ++a)
      joint[a] = cpt->table[a] * partial_wrt_parameter(circuit, state, v.id, a);
  }
  return out;
}

}  // namespace dcirc
