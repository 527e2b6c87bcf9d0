#include "dcirc/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "dcirc/errors.hpp"

namespace dcirc {

namespace {

struct DecisionSlot {
  int decision = -1;
  int alternatives = 0;
  ScopeIndexer parents;
};

struct Enumerator {
  const InfluenceDiagram& dg;
  std::vector<DecisionSlot> slots;       // temporal order
  std::uint64_t strategy_count = 1;
  ScopeIndexer joint;                    // chance + utility, ascending id, last fastest
  std::vector<ScopeIndexer> families;    // per chance/utility var

  explicit Enumerator(const InfluenceDiagram& diagram) : dg(diagram) {
    for (int d : dg.decision_sequence()) {
      DecisionSlot slot;
      slot.decision = d;
      slot.alternatives = dg.card(d);
      slot.parents = dg.parent_indexer(d);
      strategy_count = checked_mul(
          strategy_count,
          checked_pow(static_cast<std::uint64_t>(slot.alternatives), slot.parents.size()));
      slots.push_back(std::move(slot));
    }
    std::vector<int> vars, cards;
    for (const auto& v : dg.variables) {
      if (v.kind == VarKind::Decision) continue;
      vars.push_back(v.id);
      cards.push_back(v.card());
    }
    joint = ScopeIndexer(std::move(vars), std::move(cards));
    families.resize(static_cast<std::size_t>(dg.var_count()));
    for (const auto& v : dg.variables)
      if (v.kind != VarKind::Decision) families[static_cast<std::size_t>(v.id)] = dg.family_indexer(v.id);
  }

  // Decodes strategy digits: decisions in temporal order, contexts in row
  // order, the last digit varying fastest.
  std::vector<std::vector<int>> decode_strategy(std::uint64_t id) const {
    std::vector<std::vector<int>> choices(slots.size());
    for (std::size_t s = slots.size(); s-- > 0;) {
      const auto& slot = slots[s];
      auto& table = choices[s];
      table.assign(slot.parents.size(), 0);
      for (std::size_t ctx = slot.parents.size(); ctx-- > 0;) {
        table[ctx] = static_cast<int>(id % static_cast<std::uint64_t>(slot.alternatives));
        id /= static_cast<std::uint64_t>(slot.alternatives);
      }
    }
    return choices;
  }

  // Accumulates P(e) and P(U=1, e) for decisions forced by `choose`, which
  // maps (slot index, context) to an alternative. Walks the chance/utility
  // joint in lexicographic order.
  template <typename ChooseFn>
  void accumulate(const Evidence& evidence, ChooseFn&& choose, double& p_e, double& p_ue) const {
    p_e = 0.0;
    p_ue = 0.0;
    int utility = dg.utility_var();
    std::vector<int> full(static_cast<std::size_t>(dg.var_count()), 0);
    std::vector<int> joint_states(joint.vars().size());
    std::vector<int> parent_states;
    std::vector<int> family_states;

    for (std::size_t j = 0; j < joint.size(); ++j) {
      joint.decode_into(j, joint_states);
      for (std::size_t i = 0; i < joint_states.size(); ++i)
        full[static_cast<std::size_t>(joint.vars()[i])] = joint_states[i];

      // Decisions in temporal order; contexts only mention earlier values.
      bool consistent = true;
      for (std::size_t s = 0; s < slots.size(); ++s) {
        const auto& slot = slots[s];
        parent_states.resize(slot.parents.vars().size());
        for (std::size_t i = 0; i < parent_states.size(); ++i)
          parent_states[i] = full[static_cast<std::size_t>(slot.parents.vars()[i])];
        std::size_t ctx = slot.parents.index(parent_states);
        int chosen = choose(s, ctx);
        full[static_cast<std::size_t>(slot.decision)] = chosen;
        auto it = evidence.assignments.find(slot.decision);
        if (it != evidence.assignments.end() && it->second != chosen) consistent = false;
      }
      if (!consistent) continue;

      for (const auto& [var, state] : evidence.assignments) {
        if (dg.var(var).kind == VarKind::Decision) continue;
        if (full[static_cast<std::size_t>(var)] != state) {
          consistent = false;
          break;
        }
      }
      if (!consistent) continue;

      double weight = 1.0;
      for (const auto& v : dg.variables) {
        if (v.kind == VarKind::Decision) continue;
        const auto& family = families[static_cast<std::size_t>(v.id)];
        family_states.resize(family.vars().size());
        for (std::size_t i = 0; i < family_states.size(); ++i)
          family_states[i] = full[static_cast<std::size_t>(family.vars()[i])];
        weight *= dg.cpts[static_cast<std::size_t>(v.id)]->table[family.index(family_states)];
      }
      p_e += weight;
      if (utility >= 0 && full[static_cast<std::size_t>(utility)] == 0) p_ue += weight;
    }
  }
};

void check_cap(const Enumerator& en, const OracleOptions& options) {
  std::uint64_t total = checked_mul(en.strategy_count, static_cast<std::uint64_t>(en.joint.size()));
  if (total > options.instantiation_cap)
    throw SizeCapError("oracle refused: " + std::to_string(total) +
                       " instantiations exceed cap " + std::to_string(options.instantiation_cap));
}

OracleMeu run_strategies(const InfluenceDiagram& dg, const Evidence& evidence,
                         const OracleOptions& options,
                         const std::vector<ForbiddenAlternative>* forbidden,
                         const std::vector<ExcludedAlternative>* excluded) {
  require_valid(dg);
  if (dg.utility_var() < 0) throw ValidationError("oracle_meu requires a utility node");
  Enumerator en(dg);
  check_cap(en, options);

  auto feasible = [&](const std::vector<std::vector<int>>& choices) {
    if (!forbidden && !excluded) return true;
    for (std::size_t s = 0; s < en.slots.size(); ++s) {
      int d = en.slots[s].decision;
      for (std::size_t ctx = 0; ctx < choices[s].size(); ++ctx) {
        int alt = choices[s][ctx];
        if (excluded)
          for (const auto& ex : *excluded)
            if (ex.decision == d && ex.alternative == alt) return false;
        if (forbidden)
          for (const auto& fb : *forbidden)
            if (fb.decision == d && fb.context == ctx && fb.alternative == alt) return false;
      }
    }
    return true;
  };

  std::vector<double> values(en.strategy_count, -1.0);
  bool any_feasible = false;
  for (std::uint64_t s = 0; s < en.strategy_count; ++s) {
    auto choices = en.decode_strategy(s);
    if (!feasible(choices)) continue;
    any_feasible = true;
    double p_e = 0.0, p_ue = 0.0;
    en.accumulate(
        evidence, [&](std::size_t slot, std::size_t ctx) { return choices[slot][ctx]; }, p_e, p_ue);
    if (p_e <= 0.0) throw EvidenceImpossibleError("P(e) = 0");
    values[s] = p_ue / p_e;
  }
  if (!any_feasible)
    throw InfeasibleDecisionError("no feasible strategy under the given constraints");

  OracleMeu result;
  result.strategy_count = en.strategy_count;
  result.meu = *std::max_element(values.begin(), values.end());
  for (std::uint64_t s = 0; s < en.strategy_count; ++s)
    if (values[s] >= 0.0 && result.meu - values[s] <= options.argmax_tolerance)
      result.argmax.push_back(s);
  return result;
}

}  // namespace

OracleMeu oracle_meu(const InfluenceDiagram& dg, const Evidence& evidence,
                     const OracleOptions& options) {
  return run_strategies(dg, evidence, options, nullptr, nullptr);
}

OracleMeu oracle_meu_constrained(const InfluenceDiagram& dg, const Evidence& evidence,
                                 const std::vector<ForbiddenAlternative>& forbidden,
                                 const std::vector<ExcludedAlternative>& excluded,
                                 const OracleOptions& options) {
  return run_strategies(dg, evidence, options, &forbidden, &excluded);
}

double oracle_policy_value(const InfluenceDiagram& dg, const Evidence& evidence,
                           const Policy& policy, const OracleOptions& options) {
  require_valid(dg);
  if (dg.utility_var() < 0) throw ValidationError("oracle_policy_value requires a utility node");
  Enumerator en(dg);
  if (static_cast<std::uint64_t>(en.joint.size()) > options.instantiation_cap)
    throw SizeCapError("oracle refused: joint too large");

  std::vector<const Policy::Table*> tables;
  for (const auto& slot : en.slots) {
    const auto* table = policy.find(slot.decision);
    if (!table || table->entries.size() != slot.parents.size())
      throw AddressError("policy does not cover decision '" + dg.var(slot.decision).name + "'");
    tables.push_back(table);
  }

  double p_e = 0.0, p_ue = 0.0;
  en.accumulate(
      evidence,
      [&](std::size_t slot, std::size_t ctx) { return tables[slot]->entries[ctx].alternative; },
      p_e, p_ue);
  if (p_e <= 0.0) throw EvidenceImpossibleError("P(e) = 0");
  return p_ue / p_e;
}

namespace {

double joint_sum(const InfluenceDiagram& network, const Evidence& evidence,
                 const OracleOptions& options) {
  Enumerator en(network);
  if (static_cast<std::uint64_t>(en.joint.size()) > options.instantiation_cap)
    throw SizeCapError("oracle refused: joint too large");
  double p_e = 0.0, p_ue = 0.0;
  en.accumulate(
      evidence, [](std::size_t, std::size_t) { return 0; }, p_e, p_ue);
  return p_e;
}

void require_network(const InfluenceDiagram& network) {
  require_valid(network);
  if (network.has_decisions())
    throw ValidationError("oracle probability queries require a pure belief network");
}

}  // namespace

double oracle_query(const InfluenceDiagram& network, const Evidence& evidence,
                    const OracleOptions& options) {
  require_network(network);
  return joint_sum(network, evidence, options);
}

std::vector<double> oracle_marginal(const InfluenceDiagram& network, const Evidence& evidence,
                                    int var, const OracleOptions& options) {
  require_network(network);
  Evidence retracted = evidence;
  retracted.assignments.erase(var);
  std::vector<double> out;
  for (int x = 0; x < network.card(var); ++x) {
    Evidence with_x = retracted;
    with_x.assignments[var] = x;
    out.push_back(joint_sum(network, with_x, options));
  }
  return out;
}

std::vector<double> oracle_family_joint(const InfluenceDiagram& network, const Evidence& evidence,
                                        int child, const OracleOptions& options) {
  require_network(network);
  auto family = network.family_indexer(child);
  std::vector<double> out;
  out.reserve(family.size());
  for (std::size_t addr = 0; addr < family.size(); ++addr) {
    auto states = family.decode(addr);
    Evidence joined = evidence;
    bool consistent = true;
    for (std::size_t i = 0; i < states.size(); ++i) {
      int v = family.vars()[i];
      auto it = joined.assignments.find(v);
      if (it != joined.assignments.end() && it->second != states[i]) consistent = false;
      joined.assignments[v] = states[i];
    }
    out.push_back(consistent ? joint_sum(network, joined, options) : 0.0);
  }
  return out;
}

}  // namespace dcirc
