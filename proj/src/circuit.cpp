#include "dcirc/circuit.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dcirc/errors.hpp"

namespace dcirc {

namespace {

std::atomic<std::uint64_t> g_sweeps_up{0};
std::atomic<std::uint64_t> g_sweeps_down{0};

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

namespace stats {
std::uint64_t sweeps_up() { return g_sweeps_up.load(); }
std::uint64_t sweeps_down() { return g_sweeps_down.load(); }
}  // namespace stats

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Constant: return "const";
    case NodeKind::Indicator: return "indicator";
    case NodeKind::Parameter: return "parameter";
    case NodeKind::Sum: return "sum";
    case NodeKind::Product: return "product";
    case NodeKind::Max: return "max";
  }
  return "?";
}

std::int32_t Circuit::indicator(int var, int state) const {
  if (var < 0 || var >= static_cast<int>(indicator_node.size())) return -1;
  const auto& per_state = indicator_node[static_cast<std::size_t>(var)];
  if (state < 0 || state >= static_cast<int>(per_state.size())) return -1;
  return per_state[static_cast<std::size_t>(state)];
}

std::int32_t Circuit::parameter(int var, std::size_t addr) const {
  if (var < 0 || var >= static_cast<int>(parameter_node.size())) return -1;
  const auto& per_addr = parameter_node[static_cast<std::size_t>(var)];
  if (addr >= per_addr.size()) return -1;
  return per_addr[addr];
}

LeafAssignment set_leaves(const Circuit& circuit, const InfluenceDiagram& dg,
                          const Evidence& evidence,
                          const std::vector<std::pair<LeafRef, double>>& overrides) {
  LeafAssignment leaves;
  leaves.value.assign(circuit.nodes.size(), 0.0);

  for (std::size_t i = 0; i < circuit.nodes.size(); ++i) {
    const auto& node = circuit.nodes[i];
    switch (node.kind) {
      case NodeKind::Constant:
        leaves.value[i] = node.constant;
        break;
      case NodeKind::Indicator: {
        auto it = evidence.assignments.find(node.var);
        leaves.value[i] = (it != evidence.assignments.end() && it->second != node.addr) ? 0.0 : 1.0;
        break;
      }
      case NodeKind::Parameter: {
        const auto& cpt = dg.cpts.at(static_cast<std::size_t>(node.var));
        // Decisions carry no CPT; their policy slots start at 1.
        leaves.value[i] = cpt ? cpt->table.at(static_cast<std::size_t>(node.addr)) : 1.0;
        break;
      }
      default:
        break;
    }
  }

  for (const auto& [var, addr] : circuit.default_zero) {
    std::int32_t n = circuit.parameter(var, static_cast<std::size_t>(addr));
    if (n >= 0) leaves.value[static_cast<std::size_t>(n)] = 0.0;
  }

  for (const auto& [ref, value] : overrides) {
    std::int32_t n = -1;
    if (ref.kind == NodeKind::Indicator)
      n = circuit.indicator(ref.var, static_cast<int>(ref.addr));
    else if (ref.kind == NodeKind::Parameter)
      n = circuit.parameter(ref.var, static_cast<std::size_t>(ref.addr));
    if (n < 0)
      throw AddressError("override addresses a leaf not present in the circuit (var " +
                         std::to_string(ref.var) + ", addr " + std::to_string(ref.addr) + ")");
    leaves.value[static_cast<std::size_t>(n)] = value;
  }

  // Evidence must address variables that exist in the circuit.
  for (const auto& [var, state] : evidence.assignments) {
    if (circuit.indicator(var, state) < 0)
      throw AddressError("evidence addresses indicator not present in the circuit (var " +
                         std::to_string(var) + ", state " + std::to_string(state) + ")");
  }

  return leaves;
}

SweepState sweep_up(const Circuit& circuit, const LeafAssignment& leaves,
                    const SweepOptions& options) {
  const std::size_t n = circuit.nodes.size();
  SweepState state;
  state.value.assign(n, 0.0);
  state.derivative.assign(n, 0.0);
  state.argmax_child.assign(n, -1);
  state.zero_child_count.assign(n, 0);
  state.nonzero_product.assign(n, 1.0);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = circuit.nodes[i];
    switch (node.kind) {
      case NodeKind::Constant:
      case NodeKind::Indicator:
      case NodeKind::Parameter: {
        double v = leaves.value.at(i);
        if (std::isnan(v) || v < 0.0)
          throw NumericDomainError("leaf " + std::to_string(i) + " has value " + format_real(v) +
                                   "; leaves must be nonnegative");
        state.value[i] = v;
        break;
      }
      case NodeKind::Sum: {
        double s = 0.0;
        for (std::int32_t c : node.children) s += state.value[static_cast<std::size_t>(c)];
        state.value[i] = s;
        state.edge_visits_up += node.children.size();
        break;
      }
      case NodeKind::Product: {
        double nz = 1.0;
        std::int32_t zeros = 0;
        for (std::int32_t c : node.children) {
          double v = state.value[static_cast<std::size_t>(c)];
          if (v == 0.0)
            ++zeros;
          else
            nz *= v;
        }
        state.zero_child_count[i] = zeros;
        state.nonzero_product[i] = nz;
        state.value[i] = zeros ? 0.0 : nz;
        state.edge_visits_up += node.children.size();
        break;
      }
      case NodeKind::Max: {
        double best = 0.0;
        std::int32_t best_pos = -1;
        for (std::size_t pos = 0; pos < node.children.size(); ++pos) {
          double v = state.value[static_cast<std::size_t>(node.children[pos])];
          if (best_pos < 0) {
            best = v;
            best_pos = 0;
            continue;
          }
          // Ties keep the lowest position; with a relative epsilon, values
          // within eps*max(|v|,|best|) count as tied.
          double margin = options.tie_rel_eps * std::max(std::abs(v), std::abs(best));
          if (v - best > margin) {
            best = v;
            best_pos = static_cast<std::int32_t>(pos);
          }
        }
        state.value[i] = best_pos < 0 ? 0.0 : best;
        state.argmax_child[i] = best_pos;
        state.edge_visits_up += node.children.size();
        break;
      }
    }
  }
  state.values_ready = true;
  g_sweeps_up.fetch_add(1, std::memory_order_relaxed);
  return state;
}

void sweep_down(const Circuit& circuit, SweepState& state) {
  if (!state.values_ready)
    throw Error("sweep_down requires a completed upward pass");
  const std::size_t n = circuit.nodes.size();
  state.derivative.assign(n, 0.0);
  if (circuit.root >= 0) state.derivative[static_cast<std::size_t>(circuit.root)] = 1.0;

  for (std::size_t i = n; i-- > 0;) {
    const auto& node = circuit.nodes[i];
    double dp = state.derivative[i];
    switch (node.kind) {
      case NodeKind::Sum:
        for (std::int32_t c : node.children) state.derivative[static_cast<std::size_t>(c)] += dp;
        state.edge_visits_down += node.children.size();
        break;
      case NodeKind::Product: {
        std::int32_t zeros = state.zero_child_count[i];
        double nz = state.nonzero_product[i];
        double p = state.value[i];
        for (std::int32_t c : node.children) {
          double v = state.value[static_cast<std::size_t>(c)];
          double partial;
          if (zeros == 0)
            partial = p / v;
          else if (zeros == 1 && v == 0.0)
            partial = nz;
          else
            partial = 0.0;
          state.derivative[static_cast<std::size_t>(c)] += dp * partial;
        }
        state.edge_visits_down += node.children.size();
        break;
      }
      case NodeKind::Max: {
        std::int32_t best = state.argmax_child[i];
        for (std::size_t pos = 0; pos < node.children.size(); ++pos) {
          if (static_cast<std::int32_t>(pos) == best)
            state.derivative[static_cast<std::size_t>(node.children[pos])] += dp;
        }
        state.edge_visits_down += node.children.size();
        break;
      }
      default:
        break;
    }
  }
  state.derivatives_ready = true;
  g_sweeps_down.fetch_add(1, std::memory_order_relaxed);
}

double partial_wrt_indicator(const Circuit& circuit, const SweepState& state, int var,
                             int state_idx, bool* present) {
  std::int32_t n = circuit.indicator(var, state_idx);
  if (present) *present = n >= 0;
  return n >= 0 ? state.derivative[static_cast<std::size_t>(n)] : 0.0;
}

double partial_wrt_parameter(const Circuit& circuit, const SweepState& state, int var,
                             std::size_t addr, bool* present) {
  std::int32_t n = circuit.parameter(var, addr);
  if (present) *present = n >= 0;
  return n >= 0 ? state.derivative[static_cast<std::size_t>(n)] : 0.0;
}

double retracted_probability(const Circuit& circuit, const SweepState& state, int var) {
  double sum = 0.0;
  if (var < 0 || var >= static_cast<int>(circuit.indicator_node.size())) return 0.0;
  for (std::size_t s = 0; s < circuit.indicator_node[static_cast<std::size_t>(var)].size(); ++s)
    sum += partial_wrt_indicator(circuit, state, var, static_cast<int>(s));
  return sum;
}

std::string export_graph(const Circuit& circuit) {
  std::ostringstream os;
  os << "circuit nodes=" << circuit.nodes.size() << " edges=" << circuit.edge_count
     << " root=" << circuit.root << "\n";
  auto var_name = [&](std::int32_t v) -> std::string {
    if (v >= 0 && v < static_cast<int>(circuit.var_names.size()))
      return circuit.var_names[static_cast<std::size_t>(v)];
    return "v" + std::to_string(v);
  };
  auto state_name = [&](std::int32_t v, std::int32_t s) -> std::string {
    if (v >= 0 && v < static_cast<int>(circuit.state_names.size())) {
      const auto& names = circuit.state_names[static_cast<std::size_t>(v)];
      if (s >= 0 && s < static_cast<int>(names.size())) return names[static_cast<std::size_t>(s)];
    }
    return std::to_string(s);
  };
  for (std::size_t i = 0; i < circuit.nodes.size(); ++i) {
    const auto& node = circuit.nodes[i];
    os << i << " " << to_string(node.kind) << " [";
    for (std::size_t c = 0; c < node.children.size(); ++c) {
      if (c) os << " ";
      os << node.children[c];
    }
    os << "]";
    switch (node.kind) {
      case NodeKind::Constant:
        os << " " << format_real(node.constant);
        break;
      case NodeKind::Indicator:
        os << " lambda(" << var_name(node.var) << "=" << state_name(node.var, node.addr) << ")";
        break;
      case NodeKind::Parameter:
        os << " theta(" << var_name(node.var) << "[" << node.addr << "])";
        break;
      case NodeKind::Max:
        os << " max(" << var_name(node.var) << "@" << node.addr << ")";
        break;
      default:
        break;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace dcirc
