#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dcirc/model.hpp"

namespace dcirc {

enum class NodeKind : std::uint8_t { Constant, Indicator, Parameter, Sum, Product, Max };

const char* to_string(NodeKind kind);

// One node of a (decision) circuit. Indicator leaves are lambda_x / lambda_d,
// Parameter leaves are theta_{x|u} / theta_{d|u} addressed by the flat
// family index. Max nodes carry the decision id and the flat instantiation
// of the decision's informational parents.
struct CircuitNode {
  NodeKind kind = NodeKind::Constant;
  std::int32_t var = -1;    // Indicator/Parameter: variable; Max: decision
  std::int32_t addr = -1;   // Indicator: state; Parameter: family index; Max: parent instantiation
  double constant = 0.0;    // Constant only
  std::vector<std::int32_t> children;  // ordered; child index < own index
};

// Rooted DAG in topological arena order (children precede parents).
// Immutable after compilation; evaluations keep all per-run state in a
// SweepState so one circuit serves concurrent sweeps.
struct Circuit {
  std::vector<CircuitNode> nodes;
  std::int32_t root = -1;
  std::size_t edge_count = 0;  // circuit size = number of edges

  // Leaf index: address -> node id, -1 when the leaf is absent.
  std::vector<std::vector<std::int32_t>> indicator_node;  // [var][state]
  std::vector<std::vector<std::int32_t>> parameter_node;  // [var][family index]

  // Policy-extraction metadata: for each decision, the Max node per flat
  // parent instantiation.
  struct DecisionContexts {
    int decision = -1;
    std::vector<std::int32_t> max_node;
  };
  std::vector<DecisionContexts> decisions;  // temporal order

  int width = -1;  // induced width of the elimination order used

  // Symbol table for dumps and reports.
  std::vector<std::string> var_names;
  std::vector<std::vector<std::string>> state_names;

  // Parameter leaves that default to zero (conditional alternatives fixed
  // at compile time). Pairs of (variable, family index).
  std::vector<std::pair<std::int32_t, std::int32_t>> default_zero;

  bool is_leaf(std::int32_t n) const {
    NodeKind k = nodes[static_cast<std::size_t>(n)].kind;
    return k == NodeKind::Constant || k == NodeKind::Indicator || k == NodeKind::Parameter;
  }
  std::int32_t indicator(int var, int state) const;
  std::int32_t parameter(int var, std::size_t addr) const;
  std::size_t node_count() const { return nodes.size(); }
};

// Per-leaf input values for one evaluation; indexed by node id, only leaf
// slots are meaningful.
struct LeafAssignment {
  std::vector<double> value;
};

struct LeafRef {
  NodeKind kind = NodeKind::Indicator;  // Indicator or Parameter
  int var = -1;
  std::int32_t addr = -1;
};

// lambda_x = 0 wherever the evidence fixes X at a different state, 1
// otherwise; theta leaves take their CPT value; decision leaves default to 1
// (lambda_d = 1, theta_{d|u} = 1). Compile-time default_zero entries and then
// explicit overrides are applied on top. Overriding an absent leaf is an
// addressing error.
LeafAssignment set_leaves(const Circuit& circuit, const InfluenceDiagram& dg,
                          const Evidence& evidence,
                          const std::vector<std::pair<LeafRef, double>>& overrides = {});

struct SweepOptions {
  // 0 = exact tie detection at Max nodes; a positive value treats children
  // within this relative distance as tied (lower position wins).
  double tie_rel_eps = 0.0;
};

struct SweepState {
  std::vector<double> value;
  std::vector<double> derivative;
  std::vector<std::int32_t> argmax_child;  // position within children; -1 for non-Max
  std::size_t edge_visits_up = 0;
  std::size_t edge_visits_down = 0;
  bool values_ready = false;
  bool derivatives_ready = false;

  // Product bookkeeping from the upward pass, reused by the downward pass.
  std::vector<std::int32_t> zero_child_count;
  std::vector<double> nonzero_product;
};

// Leaf-to-root evaluation. Fills values and Max argmax positions.
// Throws NumericDomainError on NaN or negative leaf values.
SweepState sweep_up(const Circuit& circuit, const LeafAssignment& leaves,
                    const SweepOptions& options = {});

// Root-to-leaf chain-rule differentiation; requires a completed upward pass.
// Sum: local partial 1. Product: zero-aware sibling product. Max: 1 along the
// recorded argmax child, 0 elsewhere.
void sweep_down(const Circuit& circuit, SweepState& state);

// Stored derivative at the addressed leaf; 0 with *present=false when the
// leaf is absent from the circuit.
double partial_wrt_indicator(const Circuit& circuit, const SweepState& state, int var, int state_idx,
                             bool* present = nullptr);
double partial_wrt_parameter(const Circuit& circuit, const SweepState& state, int var,
                             std::size_t addr, bool* present = nullptr);

// Sum of indicator derivatives over the states of one variable, i.e. the
// evidence probability with X retracted.
double retracted_probability(const Circuit& circuit, const SweepState& state, int var);

// Deterministic textual dump: header line, then one line per node
// "idx kind [children] label". Byte-identical for identical circuits.
std::string export_graph(const Circuit& circuit);

// Process-wide sweep instrumentation (two-sweep contract checks).
namespace stats {
std::uint64_t sweeps_up();
std::uint64_t sweeps_down();
}  // namespace stats

}  // namespace dcirc
