#include "dcirc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "dcirc/errors.hpp"

namespace dcirc {

namespace {

constexpr double kRowSumTolerance = 1e-9;

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

const char* to_string(VarKind kind) {
  switch (kind) {
    case VarKind::Chance: return "chance";
    case VarKind::Decision: return "decision";
    case VarKind::Utility: return "utility";
  }
  return "?";
}

const Policy::Table* Policy::find(int decision) const {
  for (const auto& t : decisions)
    if (t.decision == decision) return &t;
  return nullptr;
}

int InfluenceDiagram::find_var(const std::string& name) const {
  for (const auto& v : variables)
    if (v.name == name) return v.id;
  return -1;
}

int InfluenceDiagram::utility_var() const {
  for (const auto& v : variables)
    if (v.kind == VarKind::Utility) return v.id;
  return -1;
}

bool InfluenceDiagram::has_decisions() const {
  for (const auto& v : variables)
    if (v.kind == VarKind::Decision) return true;
  return false;
}

const std::vector<int>& InfluenceDiagram::parents_of(int id) const {
  static const std::vector<int> kEmpty;
  const auto& v = var(id);
  if (v.kind == VarKind::Decision) {
    if (id < static_cast<int>(decision_parents.size())) return decision_parents[static_cast<std::size_t>(id)];
    return kEmpty;
  }
  const auto& cpt = cpts.at(static_cast<std::size_t>(id));
  if (!cpt) return kEmpty;
  return cpt->family.parents;
}

std::vector<int> InfluenceDiagram::decision_sequence() const {
  if (!decision_order.empty()) return decision_order;
  std::vector<int> decisions;
  for (const auto& v : variables)
    if (v.kind == VarKind::Decision) decisions.push_back(v.id);
  if (decisions.size() > 1)
    throw ValidationError("decision_order omitted and ambiguous: diagram has " +
                          std::to_string(decisions.size()) + " decisions");
  return decisions;
}

std::vector<std::vector<int>> InfluenceDiagram::children_adjacency() const {
  std::vector<std::vector<int>> children(variables.size());
  for (const auto& v : variables) {
    for (int p : parents_of(v.id)) {
      if (p >= 0 && p < var_count()) children[static_cast<std::size_t>(p)].push_back(v.id);
    }
  }
  return children;
}

std::vector<bool> InfluenceDiagram::decision_descendants() const {
  auto children = children_adjacency();
  std::vector<bool> reached(variables.size(), false);
  std::vector<int> stack;
  for (const auto& v : variables)
    if (v.kind == VarKind::Decision) stack.push_back(v.id);
  while (!stack.empty()) {
    int x = stack.back();
    stack.pop_back();
    for (int c : children[static_cast<std::size_t>(x)]) {
      if (!reached[static_cast<std::size_t>(c)]) {
        reached[static_cast<std::size_t>(c)] = true;
        stack.push_back(c);
      }
    }
  }
  return reached;
}

ScopeIndexer InfluenceDiagram::family_indexer(int child) const {
  std::vector<int> vars = parents_of(child);
  vars.push_back(child);
  std::vector<int> cards;
  cards.reserve(vars.size());
  for (int v : vars) cards.push_back(card(v));
  return ScopeIndexer(std::move(vars), std::move(cards));
}

ScopeIndexer InfluenceDiagram::parent_indexer(int child) const {
  std::vector<int> vars = parents_of(child);
  std::vector<int> cards;
  cards.reserve(vars.size());
  for (int v : vars) cards.push_back(card(v));
  return ScopeIndexer(std::move(vars), std::move(cards));
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& v : violations) os << v << '\n';
  return os.str();
}

std::string describe_instantiation(const InfluenceDiagram& dg, const std::vector<int>& vars,
                                   const std::vector<int>& states) {
  std::ostringstream os;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (i) os << ",";
    const auto& v = dg.var(vars[i]);
    os << v.name << "=" << v.states.at(static_cast<std::size_t>(states[i]));
  }
  if (vars.empty()) os << "<empty>";
  return os.str();
}

namespace {

void check_variables(const InfluenceDiagram& dg, ValidationReport& report) {
  std::set<std::string> names;
  for (int i = 0; i < dg.var_count(); ++i) {
    const auto& v = dg.variables[static_cast<std::size_t>(i)];
    if (v.id != i)
      report.violations.push_back("variable at position " + std::to_string(i) +
                                  " has id " + std::to_string(v.id));
    if (v.name.empty()) report.violations.push_back("variable " + std::to_string(i) + " has empty name");
    if (!names.insert(v.name).second)
      report.violations.push_back("duplicate variable name '" + v.name + "'");
    if (v.states.empty())
      report.violations.push_back("variable '" + v.name + "' has no states");
    std::set<std::string> labels(v.states.begin(), v.states.end());
    if (labels.size() != v.states.size())
      report.violations.push_back("variable '" + v.name + "' has duplicate state labels");
  }
}

void check_utility(const InfluenceDiagram& dg, ValidationReport& report) {
  std::vector<int> utilities;
  for (const auto& v : dg.variables)
    if (v.kind == VarKind::Utility) utilities.push_back(v.id);
  if (utilities.size() > 1)
    report.violations.push_back("multiple utility nodes (" + std::to_string(utilities.size()) + ")");
  if (utilities.empty() && dg.has_decisions())
    report.violations.push_back("diagram has decisions but no utility node");
  for (int u : utilities) {
    if (dg.card(u) != 2)
      report.violations.push_back("utility node '" + dg.var(u).name + "' must have exactly two states");
    for (const auto& v : dg.variables) {
      const auto& ps = dg.parents_of(v.id);
      if (std::find(ps.begin(), ps.end(), u) != ps.end())
        report.violations.push_back("utility node '" + dg.var(u).name + "' has child '" + v.name + "'");
    }
  }
}

void check_families(const InfluenceDiagram& dg, ValidationReport& report) {
  for (const auto& v : dg.variables) {
    const auto& ps = dg.parents_of(v.id);
    std::set<int> seen;
    for (int p : ps) {
      if (p < 0 || p >= dg.var_count()) {
        report.violations.push_back("variable '" + v.name + "' has out-of-range parent id " +
                                    std::to_string(p));
        return;
      }
      if (!seen.insert(p).second)
        report.violations.push_back("variable '" + v.name + "' lists parent '" +
                                    dg.var(p).name + "' twice");
      if (p == v.id)
        report.violations.push_back("variable '" + v.name + "' is its own parent");
    }
  }
}

void check_cpts(const InfluenceDiagram& dg, ValidationReport& report) {
  for (const auto& v : dg.variables) {
    const auto& cpt = dg.cpts.at(static_cast<std::size_t>(v.id));
    if (v.kind == VarKind::Decision) {
      if (cpt) report.violations.push_back("decision '" + v.name + "' carries a CPT");
      continue;
    }
    if (!cpt) {
      report.violations.push_back("variable '" + v.name + "' has no CPT");
      continue;
    }
    if (cpt->family.child != v.id) {
      report.violations.push_back("CPT of '" + v.name + "' names a different child");
      continue;
    }
    auto indexer = dg.family_indexer(v.id);
    if (cpt->table.size() != indexer.size()) {
      report.violations.push_back("CPT of '" + v.name + "' has " + std::to_string(cpt->table.size()) +
                                  " entries, expected " + std::to_string(indexer.size()));
      continue;
    }
    auto rows = dg.parent_indexer(v.id);
    int nc = v.card();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double sum = 0.0;
      bool bad_entry = false;
      for (int x = 0; x < nc; ++x) {
        double p = cpt->table[r * static_cast<std::size_t>(nc) + static_cast<std::size_t>(x)];
        if (std::isnan(p) || p < 0.0 || p > 1.0) bad_entry = true;
        sum += p;
      }
      std::string row_name = rows.empty() ? std::string("<empty>")
                                          : describe_instantiation(dg, rows.vars(), rows.decode(r));
      if (bad_entry)
        report.violations.push_back("CPT of '" + v.name + "', row {" + row_name +
                                    "}: entry outside [0,1]");
      if (std::abs(sum - 1.0) > kRowSumTolerance)
        report.violations.push_back("CPT of '" + v.name + "', row {" + row_name + "}: row sums to " +
                                    format_real(sum));
    }
  }
}

void check_acyclic(const InfluenceDiagram& dg, ValidationReport& report) {
  auto children = dg.children_adjacency();
  std::vector<int> indegree(dg.variables.size(), 0);
  for (const auto& v : dg.variables)
    indegree[static_cast<std::size_t>(v.id)] = static_cast<int>(dg.parents_of(v.id).size());
  std::vector<int> queue;
  for (const auto& v : dg.variables)
    if (indegree[static_cast<std::size_t>(v.id)] == 0) queue.push_back(v.id);
  std::size_t processed = 0;
  while (!queue.empty()) {
    int x = queue.back();
    queue.pop_back();
    ++processed;
    for (int c : children[static_cast<std::size_t>(x)])
      if (--indegree[static_cast<std::size_t>(c)] == 0) queue.push_back(c);
  }
  if (processed != dg.variables.size())
    report.violations.push_back("directed graph has a cycle");
}

void check_decision_order(const InfluenceDiagram& dg, ValidationReport& report) {
  std::vector<int> decisions;
  for (const auto& v : dg.variables)
    if (v.kind == VarKind::Decision) decisions.push_back(v.id);

  std::vector<int> order = dg.decision_order;
  if (order.empty()) {
    if (decisions.size() > 1) {
      report.violations.push_back("decision_order omitted and ambiguous: diagram has " +
                                  std::to_string(decisions.size()) + " decisions");
      return;
    }
    order = decisions;
  }
  std::set<int> in_order(order.begin(), order.end());
  if (in_order.size() != order.size()) {
    report.violations.push_back("decision_order lists a decision twice");
    return;
  }
  for (int d : order) {
    if (d < 0 || d >= dg.var_count() || dg.var(d).kind != VarKind::Decision) {
      report.violations.push_back("decision_order names a non-decision variable");
      return;
    }
  }
  if (in_order.size() != decisions.size()) {
    report.violations.push_back("decision_order does not cover every decision");
    return;
  }

  // No forgetting: each decision and everything observed before it stays
  // observed before every later decision. Consecutive pairs suffice.
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    int di = order[i], dj = order[i + 1];
    const auto& pj = dg.parents_of(dj);
    std::set<int> later(pj.begin(), pj.end());
    if (!later.count(di))
      report.violations.push_back("no-forgetting violation: '" + dg.var(dj).name +
                                  "' does not observe earlier decision '" + dg.var(di).name + "'");
    for (int p : dg.parents_of(di)) {
      if (!later.count(p))
        report.violations.push_back("no-forgetting violation: '" + dg.var(dj).name +
                                    "' does not observe '" + dg.var(p).name +
                                    "', known before '" + dg.var(di).name + "'");
    }
  }
}

}  // namespace

ValidationReport validate(const InfluenceDiagram& dg) {
  ValidationReport report;
  check_variables(dg, report);
  if (dg.cpts.size() != dg.variables.size() || dg.decision_parents.size() != dg.variables.size()) {
    report.violations.push_back("cpts/decision_parents arrays not sized to variable count");
    return report;
  }
  check_utility(dg, report);
  check_families(dg, report);
  if (!report.ok()) return report;  // index arithmetic below needs sane families
  check_cpts(dg, report);
  check_acyclic(dg, report);
  check_decision_order(dg, report);
  return report;
}

void require_valid(const InfluenceDiagram& dg) {
  auto report = validate(dg);
  if (!report.ok()) throw ValidationError("invalid diagram:\n" + report.to_string());
}

Cpt normalize_utilities(const InfluenceDiagram& dg, const Family& utility_family,
                        const std::vector<double>& raw, const UtilityScale& scale) {
  if (!(scale.u_max > scale.u_min))
    throw ValidationError("utility scale requires max > min");
  std::vector<int> cards;
  for (int p : utility_family.parents) cards.push_back(dg.card(p));
  ScopeIndexer rows(utility_family.parents, cards);
  if (raw.size() != rows.size())
    throw ValidationError("utility raw table has " + std::to_string(raw.size()) +
                          " entries, expected " + std::to_string(rows.size()));

  Cpt cpt;
  cpt.family = utility_family;
  cpt.table.resize(rows.size() * 2);
  double span = scale.u_max - scale.u_min;
  for (std::size_t r = 0; r < raw.size(); ++r) {
    double v = raw[r];
    if (std::isnan(v) || v < scale.u_min || v > scale.u_max) {
      std::string inst = rows.empty() ? std::string("<empty>")
                                      : describe_instantiation(dg, rows.vars(), rows.decode(r));
      throw ValidationError("raw utility " + format_real(v) + " at {" + inst +
                            "} outside scale [" + format_real(scale.u_min) + "," +
                            format_real(scale.u_max) + "]");
    }
    double p = (v - scale.u_min) / span;
    cpt.table[2 * r] = p;
    cpt.table[2 * r + 1] = 1.0 - p;
  }
  return cpt;
}

std::vector<int> assert_unresponsive(const InfluenceDiagram& dg, const Evidence& evidence) {
  auto responsive = dg.decision_descendants();
  std::vector<int> violations;
  for (const auto& [var, state] : evidence.assignments) {
    (void)state;
    if (var >= 0 && var < dg.var_count() && responsive[static_cast<std::size_t>(var)])
      violations.push_back(var);
  }
  return violations;
}

}  // namespace dcirc
