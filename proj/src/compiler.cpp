#include "dcirc/compiler.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <set>
#include <unordered_map>

#include "dcirc/errors.hpp"

namespace dcirc {

namespace {

// ---------------------------------------------------------------------------
// Interaction graph for ordering and width measurement.

class InteractionGraph {
 public:
  explicit InteractionGraph(int n) : adjacency_(static_cast<std::size_t>(n)) {}

  void add_clique(const std::vector<int>& vars) {
    for (std::size_t i = 0; i < vars.size(); ++i)
      for (std::size_t j = i + 1; j < vars.size(); ++j) connect(vars[i], vars[j]);
  }

  void connect(int a, int b) {
    if (a == b) return;
    adjacency_[static_cast<std::size_t>(a)].insert(b);
    adjacency_[static_cast<std::size_t>(b)].insert(a);
  }

  const std::set<int>& neighbors(int v) const { return adjacency_[static_cast<std::size_t>(v)]; }

  int degree(int v) const { return static_cast<int>(neighbors(v).size()); }

  int fill_edges(int v) const {
    const auto& nb = neighbors(v);
    int fill = 0;
    for (auto it = nb.begin(); it != nb.end(); ++it) {
      auto jt = it;
      for (++jt; jt != nb.end(); ++jt)
        if (!adjacency_[static_cast<std::size_t>(*it)].count(*jt)) ++fill;
    }
    return fill;
  }

  // Connects the remaining neighbors pairwise and removes v. Returns the
  // clique size minus one (the step width).
  int eliminate(int v) {
    std::vector<int> nb(neighbors(v).begin(), neighbors(v).end());
    for (std::size_t i = 0; i < nb.size(); ++i)
      for (std::size_t j = i + 1; j < nb.size(); ++j) connect(nb[i], nb[j]);
    for (int u : nb) adjacency_[static_cast<std::size_t>(u)].erase(v);
    adjacency_[static_cast<std::size_t>(v)].clear();
    return static_cast<int>(nb.size());
  }

 private:
  std::vector<std::set<int>> adjacency_;
};

InteractionGraph build_interaction_graph(const InfluenceDiagram& dg) {
  InteractionGraph graph(dg.var_count());
  for (const auto& v : dg.variables) {
    std::vector<int> clique = dg.parents_of(v.id);
    clique.push_back(v.id);
    graph.add_clique(clique);
  }
  return graph;
}

// Temporal blocks: block k holds the never-observed variables, block j < k
// the variables first observed by decision j+1 (0-based temporal index).
// Elimination runs block k, decision k, block k-1, ..., decision 1, block 0.
struct TemporalBlocks {
  std::vector<int> decisions;            // temporal order
  std::vector<std::vector<int>> blocks;  // blocks[j], j in [0, k]
};

TemporalBlocks temporal_blocks(const InfluenceDiagram& dg) {
  TemporalBlocks tb;
  tb.decisions = dg.decision_sequence();
  std::size_t k = tb.decisions.size();
  tb.blocks.assign(k + 1, {});
  std::vector<int> first_observer(static_cast<std::size_t>(dg.var_count()), -1);
  for (std::size_t j = 0; j < k; ++j) {
    for (int p : dg.parents_of(tb.decisions[j])) {
      auto& slot = first_observer[static_cast<std::size_t>(p)];
      if (slot < 0) slot = static_cast<int>(j);
    }
  }
  for (const auto& v : dg.variables) {
    if (v.kind == VarKind::Decision) continue;
    int obs = first_observer[static_cast<std::size_t>(v.id)];
    tb.blocks[obs < 0 ? k : static_cast<std::size_t>(obs)].push_back(v.id);
  }
  return tb;
}

int pick_next(const std::vector<int>& candidates, const InteractionGraph& graph,
              Heuristic heuristic) {
  int best = candidates.front();
  if (heuristic == Heuristic::AsGiven) {
    for (int v : candidates) best = std::min(best, v);
    return best;
  }
  long best_score = -1;
  for (int v : candidates) {
    long score = heuristic == Heuristic::MinFill ? graph.fill_edges(v) : graph.degree(v);
    if (best_score < 0 || score < best_score || (score == best_score && v < best)) {
      best_score = score;
      best = v;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Hash-consed circuit construction.

struct NodeKey {
  NodeKind kind;
  std::int32_t var;
  std::int32_t addr;
  std::uint64_t constant_bits;
  std::vector<std::int32_t> children;

  bool operator==(const NodeKey& o) const {
    return kind == o.kind && var == o.var && addr == o.addr &&
           constant_bits == o.constant_bits && children == o.children;
  }
};

struct NodeKeyHash {
  std::size_t operator()(const NodeKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.kind);
    auto mix = [&h](std::size_t v) {
      h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    mix(static_cast<std::size_t>(k.var));
    mix(static_cast<std::size_t>(k.addr));
    mix(static_cast<std::size_t>(k.constant_bits));
    for (std::int32_t c : k.children) mix(static_cast<std::size_t>(c));
    return h;
  }
};

class CircuitBuilder {
 public:
  CircuitBuilder(const InfluenceDiagram& dg, bool consing) : consing_(consing) {
    circuit_.indicator_node.resize(static_cast<std::size_t>(dg.var_count()));
    circuit_.parameter_node.resize(static_cast<std::size_t>(dg.var_count()));
    for (const auto& v : dg.variables) {
      circuit_.indicator_node[static_cast<std::size_t>(v.id)].assign(
          static_cast<std::size_t>(v.card()), -1);
      circuit_.parameter_node[static_cast<std::size_t>(v.id)].assign(
          dg.family_indexer(v.id).size(), -1);
      circuit_.var_names.push_back(v.name);
      circuit_.state_names.push_back(v.states);
    }
  }

  std::int32_t constant(double value) {
    return intern({NodeKind::Constant, -1, -1, std::bit_cast<std::uint64_t>(value), {}});
  }

  std::int32_t indicator(int var, int state) {
    auto& slot = circuit_.indicator_node[static_cast<std::size_t>(var)][static_cast<std::size_t>(state)];
    if (slot < 0) slot = push({NodeKind::Indicator, var, state, 0.0, {}});
    return slot;
  }

  std::int32_t parameter(int var, std::size_t addr) {
    auto& slot = circuit_.parameter_node[static_cast<std::size_t>(var)][addr];
    if (slot < 0)
      slot = push({NodeKind::Parameter, var, static_cast<std::int32_t>(addr), 0.0, {}});
    return slot;
  }

  std::int32_t sum(std::vector<std::int32_t> children) {
    return intern({NodeKind::Sum, -1, -1, 0, std::move(children)});
  }

  std::int32_t product(std::vector<std::int32_t> children) {
    return intern({NodeKind::Product, -1, -1, 0, std::move(children)});
  }

  // Max nodes are never merged: one per (decision, parent instantiation) so
  // every observation context keeps its own argmax slot.
  std::int32_t max_node(int decision, std::size_t context, std::vector<std::int32_t> children) {
    return push({NodeKind::Max, decision, static_cast<std::int32_t>(context), 0.0,
                 std::move(children)});
  }

  // A monomial becomes a node: the single term itself, or a Product.
  std::int32_t materialize(const std::vector<std::int32_t>& terms) {
    if (terms.empty()) return constant(1.0);
    if (terms.size() == 1) return terms.front();
    return product(terms);
  }

  Circuit take(std::int32_t root) {
    circuit_.root = root;
    circuit_.edge_count = 0;
    for (const auto& n : circuit_.nodes) circuit_.edge_count += n.children.size();
    return std::move(circuit_);
  }

 private:
  std::int32_t push(CircuitNode node) {
    circuit_.nodes.push_back(std::move(node));
    return static_cast<std::int32_t>(circuit_.nodes.size() - 1);
  }

  std::int32_t intern(NodeKey key) {
    if (consing_) {
      auto it = cons_.find(key);
      if (it != cons_.end()) return it->second;
    }
    CircuitNode node;
    node.kind = key.kind;
    node.var = key.var;
    node.addr = key.addr;
    node.constant = std::bit_cast<double>(key.constant_bits);
    node.children = key.children;
    std::int32_t id = push(std::move(node));
    if (consing_) cons_.emplace(std::move(key), id);
    return id;
  }

  bool consing_;
  Circuit circuit_;
  std::unordered_map<NodeKey, std::int32_t, NodeKeyHash> cons_;
};

// Symbolic factor: a table of monomials (term lists) over a sorted scope.
// Multiplying factors concatenates term lists; a Sum/Max materializes its
// operand monomials into sub-circuit roots.
struct Factor {
  std::vector<int> scope;  // sorted ascending
  ScopeIndexer indexer;
  std::vector<std::vector<std::int32_t>> cells;
  bool alive = true;
};

ScopeIndexer indexer_over(const InfluenceDiagram& dg, std::vector<int> scope) {
  std::vector<int> cards;
  cards.reserve(scope.size());
  for (int v : scope) cards.push_back(dg.card(v));
  return ScopeIndexer(std::move(scope), std::move(cards));
}

Factor initial_factor(const InfluenceDiagram& dg, int var, CircuitBuilder& builder) {
  const auto& parents = dg.parents_of(var);
  std::vector<int> scope = parents;
  scope.push_back(var);
  std::sort(scope.begin(), scope.end());

  Factor factor;
  factor.indexer = indexer_over(dg, scope);
  factor.scope = factor.indexer.vars();
  factor.cells.resize(factor.indexer.size());

  auto family = dg.family_indexer(var);
  std::vector<int> scope_states(factor.scope.size());
  std::vector<int> family_states(family.vars().size());
  std::vector<int> family_pos(family.vars().size());
  for (std::size_t i = 0; i < family.vars().size(); ++i)
    family_pos[i] = factor.indexer.position_of(family.vars()[i]);

  int child_pos = factor.indexer.position_of(var);
  for (std::size_t cell = 0; cell < factor.cells.size(); ++cell) {
    factor.indexer.decode_into(cell, scope_states);
    for (std::size_t i = 0; i < family_states.size(); ++i)
      family_states[i] = scope_states[static_cast<std::size_t>(family_pos[i])];
    std::size_t addr = family.index(family_states);
    factor.cells[cell] = {builder.indicator(var, scope_states[static_cast<std::size_t>(child_pos)]),
                          builder.parameter(var, addr)};
  }
  return factor;
}

void check_order_legal(const InfluenceDiagram& dg, const EliminationOrder& order) {
  const int n = dg.var_count();
  std::vector<int> position(static_cast<std::size_t>(n), -1);
  if (static_cast<int>(order.sequence.size()) != n)
    throw ValidationError("elimination order does not cover every variable");
  for (std::size_t i = 0; i < order.sequence.size(); ++i) {
    int v = order.sequence[i];
    if (v < 0 || v >= n || position[static_cast<std::size_t>(v)] >= 0)
      throw ValidationError("elimination order is not a permutation of the variables");
    position[static_cast<std::size_t>(v)] = static_cast<int>(i);
  }

  auto decisions = dg.decision_sequence();
  int utility = dg.utility_var();
  for (std::size_t j = 0; j + 1 < decisions.size(); ++j) {
    // Reverse temporal order: the latest decision is eliminated first.
    if (position[static_cast<std::size_t>(decisions[j])] <
        position[static_cast<std::size_t>(decisions[j + 1])])
      throw ValidationError("elimination order violates the temporal order of decisions");
  }
  for (int d : decisions) {
    if (utility >= 0 && position[static_cast<std::size_t>(utility)] >
                            position[static_cast<std::size_t>(d)])
      throw ValidationError("utility node must be eliminated before every decision");
    std::set<int> observed(dg.parents_of(d).begin(), dg.parents_of(d).end());
    for (const auto& v : dg.variables) {
      if (v.id == d || v.kind == VarKind::Decision) continue;
      bool after = position[static_cast<std::size_t>(v.id)] > position[static_cast<std::size_t>(d)];
      bool is_observed = observed.count(v.id) != 0;
      if (is_observed && !after)
        throw ValidationError("variable '" + v.name + "' is observed before decision '" +
                              dg.var(d).name + "' but eliminated earlier");
      if (!is_observed && after)
        throw ValidationError("variable '" + v.name + "' is eliminated after decision '" +
                              dg.var(d).name + "' but not observed before it");
    }
  }
}

}  // namespace

const char* to_string(Heuristic h) {
  switch (h) {
    case Heuristic::MinFill: return "min-fill";
    case Heuristic::MinDegree: return "min-degree";
    case Heuristic::AsGiven: return "as-given";
  }
  return "?";
}

EliminationOrder constrained_order(const InfluenceDiagram& dg, Heuristic heuristic) {
  require_valid(dg);
  auto tb = temporal_blocks(dg);
  auto graph = build_interaction_graph(dg);
  int utility = dg.utility_var();

  EliminationOrder order;
  auto eliminate = [&](int v) {
    order.sequence.push_back(v);
    order.width = std::max(order.width, graph.eliminate(v));
  };

  std::size_t k = tb.decisions.size();
  for (std::size_t step = 0; step <= k; ++step) {
    std::size_t block = k - step;
    std::vector<int> pending = tb.blocks[block];
    std::sort(pending.begin(), pending.end());
    // The utility node leads its block: the value dimension sums out
    // innermost.
    if (utility >= 0) {
      auto it = std::find(pending.begin(), pending.end(), utility);
      if (it != pending.end()) {
        pending.erase(it);
        eliminate(utility);
      }
    }
    while (!pending.empty()) {
      int v = pick_next(pending, graph, heuristic);
      pending.erase(std::find(pending.begin(), pending.end(), v));
      eliminate(v);
    }
    if (block > 0) eliminate(tb.decisions[block - 1]);
  }

  // Partition bookkeeping per decision.
  std::vector<int> position(static_cast<std::size_t>(dg.var_count()), -1);
  for (std::size_t i = 0; i < order.sequence.size(); ++i)
    position[static_cast<std::size_t>(order.sequence[i])] = static_cast<int>(i);
  for (int d : tb.decisions) {
    EliminationOrder::DecisionSplit split;
    split.decision = d;
    for (int v : order.sequence) {
      if (v == d) continue;
      (position[static_cast<std::size_t>(v)] < position[static_cast<std::size_t>(d)]
           ? split.before
           : split.after)
          .push_back(v);
    }
    order.partitions.push_back(std::move(split));
  }
  return order;
}

Circuit compile(const InfluenceDiagram& dg, const EliminationOrder& order,
                const CompileOptions& options) {
  require_valid(dg);
  check_order_legal(dg, order);

  CircuitBuilder builder(dg, options.hash_consing);

  std::vector<Factor> pool;
  pool.reserve(dg.variables.size() * 2);
  for (const auto& v : dg.variables) pool.push_back(initial_factor(dg, v.id, builder));

  std::vector<Circuit::DecisionContexts> decision_contexts;
  auto temporal = dg.decision_sequence();
  for (int d : temporal) {
    Circuit::DecisionContexts ctx;
    ctx.decision = d;
    ctx.max_node.assign(dg.parent_indexer(d).size(), -1);
    decision_contexts.push_back(std::move(ctx));
  }

  for (int target : order.sequence) {
    // Collect the factors mentioning the target, in pool order.
    std::vector<std::size_t> involved;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!pool[i].alive) continue;
      if (std::binary_search(pool[i].scope.begin(), pool[i].scope.end(), target))
        involved.push_back(i);
    }
    assert(!involved.empty());  // every variable owns an initial factor

    std::vector<int> merged_scope;
    for (std::size_t i : involved)
      merged_scope.insert(merged_scope.end(), pool[i].scope.begin(), pool[i].scope.end());
    std::sort(merged_scope.begin(), merged_scope.end());
    merged_scope.erase(std::unique(merged_scope.begin(), merged_scope.end()), merged_scope.end());

    std::vector<int> out_scope = merged_scope;
    out_scope.erase(std::find(out_scope.begin(), out_scope.end(), target));

    ScopeIndexer merged = indexer_over(dg, merged_scope);
    Factor result;
    result.indexer = indexer_over(dg, out_scope);
    result.scope = result.indexer.vars();
    result.cells.resize(result.indexer.size());

    // Position maps from the merged scope into each operand and the output.
    std::vector<std::vector<int>> operand_pos;
    for (std::size_t i : involved) {
      std::vector<int> pos;
      for (int v : pool[i].scope) pos.push_back(merged.position_of(v));
      operand_pos.push_back(std::move(pos));
    }
    std::vector<int> out_pos;
    for (int v : out_scope) out_pos.push_back(merged.position_of(v));
    int target_pos = merged.position_of(target);
    int target_card = dg.card(target);

    const bool is_decision = dg.var(target).kind == VarKind::Decision;
    ScopeIndexer target_parents = dg.parent_indexer(target);
    std::vector<int> parent_pos;
    if (is_decision)
      for (int v : target_parents.vars()) parent_pos.push_back(merged.position_of(v));

    Circuit::DecisionContexts* contexts = nullptr;
    if (is_decision) {
      for (auto& dc : decision_contexts)
        if (dc.decision == target) contexts = &dc;
    }

    std::vector<int> merged_states(merged_scope.size());
    std::vector<int> operand_states;
    std::vector<int> out_states(out_scope.size());
    std::vector<int> parent_states(parent_pos.size());

    for (std::size_t out_cell = 0; out_cell < result.cells.size(); ++out_cell) {
      result.indexer.decode_into(out_cell, out_states);
      for (std::size_t i = 0; i < out_states.size(); ++i)
        merged_states[static_cast<std::size_t>(out_pos[i])] = out_states[i];

      // Gather the combined monomial per target state.
      std::vector<std::vector<std::int32_t>> branch(static_cast<std::size_t>(target_card));
      for (int x = 0; x < target_card; ++x) {
        merged_states[static_cast<std::size_t>(target_pos)] = x;
        auto& terms = branch[static_cast<std::size_t>(x)];
        for (std::size_t f = 0; f < involved.size(); ++f) {
          const Factor& op = pool[involved[f]];
          operand_states.resize(op.scope.size());
          for (std::size_t i = 0; i < op.scope.size(); ++i)
            operand_states[i] = merged_states[static_cast<std::size_t>(operand_pos[f][i])];
          const auto& cell = op.cells[op.indexer.index(operand_states)];
          terms.insert(terms.end(), cell.begin(), cell.end());
        }
      }

      if (is_decision) {
        std::vector<std::int32_t> children;
        children.reserve(branch.size());
        for (auto& terms : branch) children.push_back(builder.materialize(terms));
        for (std::size_t i = 0; i < parent_states.size(); ++i)
          parent_states[i] = merged_states[static_cast<std::size_t>(parent_pos[i])];
        std::size_t context = target_parents.index(parent_states);
        std::int32_t node = builder.max_node(target, context, std::move(children));
        contexts->max_node[context] = node;
        result.cells[out_cell] = {node};
      } else if (target_card == 1) {
        // Summing over one state is a pass-through; keep the monomial open.
        result.cells[out_cell] = std::move(branch.front());
      } else {
        std::vector<std::int32_t> children;
        children.reserve(branch.size());
        for (auto& terms : branch) children.push_back(builder.materialize(terms));
        result.cells[out_cell] = {builder.sum(std::move(children))};
      }
    }

    for (std::size_t i : involved) pool[i].alive = false;
    pool.push_back(std::move(result));
  }

  // Whatever remains carries an empty scope; disconnected components leave
  // several scalar cells that multiply into the root.
  std::vector<std::int32_t> root_terms;
  for (const auto& factor : pool) {
    if (!factor.alive) continue;
    assert(factor.scope.empty() && factor.cells.size() == 1);
    root_terms.insert(root_terms.end(), factor.cells[0].begin(), factor.cells[0].end());
  }
  std::int32_t root = builder.materialize(root_terms);

  Circuit circuit = builder.take(root);
  circuit.width = order.width;
  circuit.decisions = std::move(decision_contexts);
  for (const auto& fa : options.forbidden) {
    if (fa.decision < 0 || fa.decision >= dg.var_count() ||
        dg.var(fa.decision).kind != VarKind::Decision)
      throw AddressError("forbidden alternative names a non-decision variable");
    auto parents = dg.parent_indexer(fa.decision);
    if (fa.context >= parents.size() || fa.alternative < 0 ||
        fa.alternative >= dg.card(fa.decision))
      throw AddressError("forbidden alternative out of range for decision '" +
                         dg.var(fa.decision).name + "'");
    std::size_t addr = fa.context * static_cast<std::size_t>(dg.card(fa.decision)) +
                       static_cast<std::size_t>(fa.alternative);
    circuit.default_zero.emplace_back(fa.decision, static_cast<std::int32_t>(addr));
  }
  return circuit;
}

std::vector<TreewidthRow> treewidth_report(const InfluenceDiagram& dg) {
  std::vector<TreewidthRow> rows;
  for (Heuristic h : {Heuristic::MinFill, Heuristic::MinDegree, Heuristic::AsGiven}) {
    auto order = constrained_order(dg, h);
    auto circuit = compile(dg, order);
    rows.push_back({h, order.width, circuit.node_count(), circuit.edge_count});
  }
  return rows;
}

}  // namespace dcirc
