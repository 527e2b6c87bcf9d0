#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dcirc/indexing.hpp"

namespace dcirc {

enum class VarKind { Chance, Decision, Utility };

const char* to_string(VarKind kind);

struct Variable {
  int id = -1;
  std::string name;
  VarKind kind = VarKind::Chance;
  std::vector<std::string> states;

  int card() const { return static_cast<int>(states.size()); }
};

struct Family {
  int child = -1;
  std::vector<int> parents;  // ordered; the order fixes the table layout
};

// Conditional probability table, flattened parent-major: the last listed
// parent varies fastest and the child state is innermost.
struct Cpt {
  Family family;
  std::vector<double> table;
};

struct Evidence {
  std::map<int, int> assignments;  // variable id -> state index

  bool assigns(int var) const { return assignments.count(var) != 0; }
};

struct UtilityScale {
  double u_min = 0.0;
  double u_max = 1.0;
};

// Constraint specs shared by the evaluator, the compiler and the oracle.
// `context` is the flat index over the decision's informational parents.
struct ForbiddenAlternative {
  int decision = -1;
  std::size_t context = 0;
  int alternative = -1;
};

struct ExcludedAlternative {
  int decision = -1;
  int alternative = -1;
};

struct PolicyEntry {
  int alternative = 0;
  bool moot = false;  // observation context impossible under the evidence
};

// One table per decision mapping each instantiation of the decision's
// informational parents to the chosen alternative.
struct Policy {
  struct Table {
    int decision = -1;
    std::vector<PolicyEntry> entries;  // indexed by flat parent instantiation
  };
  std::vector<Table> decisions;  // temporal order

  const Table* find(int decision) const;
};

// A typed DAG of chance/decision/utility variables. A pure belief network is
// the special case with no decisions (a utility node is then optional).
// Deterministic variables are chance variables with 0/1 rows; the utility
// node is stored as a distinguished binary variable whose first state carries
// the normalized utility probability. Immutable after construction and safe
// to share across threads.
struct InfluenceDiagram {
  std::vector<Variable> variables;                 // ids are dense positions
  std::vector<std::optional<Cpt>> cpts;            // chance + utility only
  std::vector<std::vector<int>> decision_parents;  // decisions only
  std::vector<int> decision_order;                 // temporal; may be empty
  std::optional<UtilityScale> scale;               // set when utilities were normalized

  int var_count() const { return static_cast<int>(variables.size()); }
  const Variable& var(int id) const { return variables.at(static_cast<std::size_t>(id)); }
  int card(int id) const { return var(id).card(); }
  int find_var(const std::string& name) const;  // -1 if absent
  int utility_var() const;                      // -1 if absent
  bool has_decisions() const;

  // Family parents for chance/utility, informational parents for decisions.
  const std::vector<int>& parents_of(int id) const;

  // Explicit decision_order, or the trivially derived one when the diagram
  // has at most one decision. Throws ValidationError when omitted and
  // ambiguous.
  std::vector<int> decision_sequence() const;

  std::vector<std::vector<int>> children_adjacency() const;
  std::vector<bool> decision_descendants() const;

  ScopeIndexer family_indexer(int child) const;  // [parents..., child]
  ScopeIndexer parent_indexer(int child) const;  // [parents...]
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

// Pure and side-effect free; lists every violated invariant.
ValidationReport validate(const InfluenceDiagram& dg);

// Throws ValidationError with the full report when the diagram is invalid.
void require_valid(const InfluenceDiagram& dg);

// Maps raw utilities (one per utility-parent instantiation, canonical row
// order) onto P(u|.) = (raw - u_min) / (u_max - u_min). Throws ValidationError
// when a raw value falls outside the scale, naming the instantiation.
Cpt normalize_utilities(const InfluenceDiagram& dg, const Family& utility_family,
                        const std::vector<double>& raw, const UtilityScale& scale);

// Evidence variables reachable by a directed path from some decision.
std::vector<int> assert_unresponsive(const InfluenceDiagram& dg, const Evidence& evidence);

// "W=w" style rendering of a parent instantiation, used by error messages
// and reports.
std::string describe_instantiation(const InfluenceDiagram& dg, const std::vector<int>& vars,
                                   const std::vector<int>& states);

}  // namespace dcirc
