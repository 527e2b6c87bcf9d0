#include "dcirc/normal_form.hpp"

#include <algorithm>

#include "dcirc/errors.hpp"

namespace dcirc {

StrategyCodec StrategyCodec::over(const InfluenceDiagram& dg) {
  StrategyCodec codec;
  for (int d : dg.decision_sequence())
    codec.slots.push_back({d, dg.parent_indexer(d).size(), dg.card(d)});
  return codec;
}

std::uint64_t StrategyCodec::count() const {
  std::uint64_t n = 1;
  for (const auto& slot : slots)
    n = checked_mul(n, checked_pow(static_cast<std::uint64_t>(slot.alternatives), slot.contexts));
  return n;
}

std::vector<std::vector<int>> StrategyCodec::decode(std::uint64_t id) const {
  std::vector<std::vector<int>> choices(slots.size());
  for (std::size_t s = slots.size(); s-- > 0;) {
    const auto& slot = slots[s];
    choices[s].assign(slot.contexts, 0);
    for (std::size_t ctx = slot.contexts; ctx-- > 0;) {
      choices[s][ctx] = static_cast<int>(id % static_cast<std::uint64_t>(slot.alternatives));
      id /= static_cast<std::uint64_t>(slot.alternatives);
    }
  }
  return choices;
}

std::uint64_t StrategyCodec::encode(const std::vector<std::vector<int>>& choices) const {
  std::uint64_t id = 0;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    for (std::size_t ctx = 0; ctx < slots[s].contexts; ++ctx)
      id = id * static_cast<std::uint64_t>(slots[s].alternatives) +
           static_cast<std::uint64_t>(choices[s][ctx]);
  }
  return id;
}

Policy StrategyCodec::to_policy(std::uint64_t id) const {
  auto choices = decode(id);
  Policy policy;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    Policy::Table table;
    table.decision = slots[s].decision;
    table.entries.resize(slots[s].contexts);
    for (std::size_t ctx = 0; ctx < slots[s].contexts; ++ctx)
      table.entries[ctx].alternative = choices[s][ctx];
    policy.decisions.push_back(std::move(table));
  }
  return policy;
}

std::uint64_t StrategyCodec::from_policy(const Policy& policy) const {
  std::vector<std::vector<int>> choices(slots.size());
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const auto* table = policy.find(slots[s].decision);
    if (!table || table->entries.size() != slots[s].contexts)
      throw AddressError("policy does not cover decision id " +
                         std::to_string(slots[s].decision));
    choices[s].resize(slots[s].contexts);
    for (std::size_t ctx = 0; ctx < slots[s].contexts; ++ctx)
      choices[s][ctx] = table->entries[ctx].alternative;
  }
  return encode(choices);
}

NormalFormDiagram to_normal_form(const InfluenceDiagram& dg, const NormalFormOptions& options) {
  require_valid(dg);
  NormalFormDiagram nf;
  nf.codec = StrategyCodec::over(dg);
  std::uint64_t n_s = nf.codec.count();
  if (n_s > options.strategy_cap)
    throw SizeCapError("normal form refused: N_S = " + std::to_string(n_s) + " exceeds cap " +
                       std::to_string(options.strategy_cap));

  nf.network = dg;
  nf.network.decision_order.clear();

  // Strategy variable S: a root uncertainty with the uniform prior.
  Variable s_var;
  s_var.id = dg.var_count();
  s_var.name = "S";
  while (nf.network.find_var(s_var.name) >= 0) s_var.name += "_";
  s_var.kind = VarKind::Chance;
  s_var.states.reserve(n_s);
  for (std::uint64_t s = 0; s < n_s; ++s) s_var.states.push_back("s" + std::to_string(s));
  nf.strategy_var = s_var.id;

  Cpt s_cpt;
  s_cpt.family.child = s_var.id;
  s_cpt.table.assign(n_s, 1.0 / static_cast<double>(n_s));
  nf.network.variables.push_back(std::move(s_var));
  nf.network.cpts.push_back(std::move(s_cpt));
  nf.network.decision_parents.emplace_back();

  // Each decision becomes a deterministic function of S and its former
  // informational parents: rows are 0/1.
  for (std::size_t slot = 0; slot < nf.codec.slots.size(); ++slot) {
    int d = nf.codec.slots[slot].decision;
    auto contexts = dg.parent_indexer(d);
    int alts = dg.card(d);

    Cpt cpt;
    cpt.family.child = d;
    cpt.family.parents.push_back(nf.strategy_var);
    for (int p : dg.decision_parents[static_cast<std::size_t>(d)]) cpt.family.parents.push_back(p);
    cpt.table.assign(n_s * contexts.size() * static_cast<std::size_t>(alts), 0.0);
    for (std::uint64_t s = 0; s < n_s; ++s) {
      auto choices = nf.codec.decode(s);
      for (std::size_t ctx = 0; ctx < contexts.size(); ++ctx) {
        auto chosen = static_cast<std::size_t>(choices[slot][ctx]);
        cpt.table[(s * contexts.size() + ctx) * static_cast<std::size_t>(alts) + chosen] = 1.0;
      }
    }
    nf.network.variables[static_cast<std::size_t>(d)].kind = VarKind::Chance;
    nf.network.cpts[static_cast<std::size_t>(d)] = std::move(cpt);
    nf.network.decision_parents[static_cast<std::size_t>(d)].clear();
  }
  return nf;
}

EvaluationResult solve_normal_form(const InfluenceDiagram& dg, const Evidence& evidence,
                                   const NormalFormOptions& options) {
  int utility = dg.utility_var();
  if (utility < 0) throw ValidationError("solve_normal_form requires a utility node");
  {
    auto responsive = assert_unresponsive(dg, evidence);
    if (!responsive.empty())
      throw ValidationError("evidence is responsive to decisions");
    if (evidence.assigns(utility))
      throw ValidationError("evidence must not assign the utility node");
  }

  auto nf = to_normal_form(dg, options);
  auto order = constrained_order(nf.network, options.heuristic);
  auto circuit = compile(nf.network, order);

  Evidence prime = evidence;
  prime.assignments[utility] = 0;
  auto leaves = set_leaves(circuit, nf.network, prime);
  auto state = sweep_up(circuit, leaves);
  sweep_down(circuit, state);

  std::uint64_t n_s = nf.codec.count();
  std::uint64_t best = 0;
  double best_derivative = -1.0;
  for (std::uint64_t s = 0; s < n_s; ++s) {
    double d = partial_wrt_indicator(circuit, state, nf.strategy_var, static_cast<int>(s));
    if (d > best_derivative) {  // strict: ties keep the lowest strategy id
      best_derivative = d;
      best = s;
    }
  }

  double p_e = partial_wrt_indicator(circuit, state, utility, 0) +
               partial_wrt_indicator(circuit, state, utility, 1);
  if (p_e <= 0.0) throw EvidenceImpossibleError("P(e) = 0: evidence impossible, MEU undefined");

  EvaluationResult result;
  result.strategy_id = best;
  result.policy = nf.codec.to_policy(best);
  result.root_value = state.value[static_cast<std::size_t>(circuit.root)];
  result.prob_evidence = p_e;
  result.meu = best_derivative * static_cast<double>(n_s) / p_e;
  result.derivative_semantics = "arithmetic";
  result.edge_visits_up = state.edge_visits_up;
  result.edge_visits_down = state.edge_visits_down;

  result.indicator_derivative.resize(nf.network.variables.size());
  result.parameter_derivative.resize(nf.network.variables.size());
  for (const auto& v : nf.network.variables) {
    auto& ind = result.indicator_derivative[static_cast<std::size_t>(v.id)];
    ind.assign(static_cast<std::size_t>(v.card()), 0.0);
    for (int s = 0; s < v.card(); ++s)
      ind[static_cast<std::size_t>(s)] = partial_wrt_indicator(circuit, state, v.id, s);
    auto family = nf.network.family_indexer(v.id);
    auto& par = result.parameter_derivative[static_cast<std::size_t>(v.id)];
    par.assign(family.size(), 0.0);
    for (std::size_t a = 0; a < family.size(); ++a)
      par[a] = partial_wrt_parameter(circuit, state, v.id, a);
  }
  return result;
}

}  // namespace dcirc
