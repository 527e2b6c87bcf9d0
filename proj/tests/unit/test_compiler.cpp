#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "dcirc/compiler.hpp"
#include "dcirc/errors.hpp"
#include "dcirc/io.hpp"
#include "testutil.hpp"

using namespace dcirc;

namespace {

// Independent induced-width computation for brute-force order checks.
int induced_width(const InfluenceDiagram& dg, const std::vector<int>& sequence) {
  std::vector<std::set<int>> adj(dg.variables.size());
  auto clique = [&](std::vector<int> vars) {
    for (std::size_t i = 0; i < vars.size(); ++i)
      for (std::size_t j = i + 1; j < vars.size(); ++j) {
        adj[static_cast<std::size_t>(vars[i])].insert(vars[j]);
        adj[static_cast<std::size_t>(vars[j])].insert(vars[i]);
      }
  };
  for (const auto& v : dg.variables) {
    auto family = dg.parents_of(v.id);
    family.push_back(v.id);
    clique(family);
  }
  int width = 0;
  for (int v : sequence) {
    std::vector<int> nb(adj[static_cast<std::size_t>(v)].begin(),
                        adj[static_cast<std::size_t>(v)].end());
    width = std::max(width, static_cast<int>(nb.size()));
    clique(nb);
    for (int u : nb) adj[static_cast<std::size_t>(u)].erase(v);
    adj[static_cast<std::size_t>(v)].clear();
  }
  return width;
}

bool order_is_legal(const InfluenceDiagram& dg, const std::vector<int>& sequence) {
  std::vector<int> pos(dg.variables.size());
  for (std::size_t i = 0; i < sequence.size(); ++i)
    pos[static_cast<std::size_t>(sequence[i])] = static_cast<int>(i);
  auto decisions = dg.decision_sequence();
  int u = dg.utility_var();
  for (std::size_t j = 0; j + 1 < decisions.size(); ++j)
    if (pos[static_cast<std::size_t>(decisions[j])] < pos[static_cast<std::size_t>(decisions[j + 1])])
      return false;
  for (int d : decisions) {
    if (u >= 0 && pos[static_cast<std::size_t>(u)] > pos[static_cast<std::size_t>(d)]) return false;
    std::set<int> observed(dg.parents_of(d).begin(), dg.parents_of(d).end());
    for (const auto& v : dg.variables) {
      if (v.id == d || v.kind == VarKind::Decision) continue;
      bool after = pos[static_cast<std::size_t>(v.id)] > pos[static_cast<std::size_t>(d)];
      if (observed.count(v.id) != after) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("umbrella order sums out U first, then W, then maxes B") {
  auto dg = testutil::umbrella();
  for (auto h : {Heuristic::MinFill, Heuristic::MinDegree, Heuristic::AsGiven}) {
    auto order = constrained_order(dg, h);
    CHECK(order.sequence == std::vector<int>{2, 0, 1});
    CHECK(order.width == 2);
    REQUIRE(order.partitions.size() == 1);
    CHECK(order.partitions[0].decision == 1);
    CHECK(order.partitions[0].before == std::vector<int>{2, 0});
    CHECK(order.partitions[0].after.empty());
  }
}

TEST_CASE("chain network has width one under min-fill") {
  InfluenceDiagram dg;
  dg.variables = {
      {0, "X1", VarKind::Chance, {"a", "b"}},
      {1, "X2", VarKind::Chance, {"a", "b"}},
      {2, "X3", VarKind::Chance, {"a", "b"}},
  };
  dg.cpts.resize(3);
  dg.decision_parents.resize(3);
  dg.cpts[0] = Cpt{{0, {}}, {0.4, 0.6}};
  dg.cpts[1] = Cpt{{1, {0}}, {0.3, 0.7, 0.9, 0.1}};
  dg.cpts[2] = Cpt{{2, {1}}, {0.5, 0.5, 0.2, 0.8}};
  auto order = constrained_order(dg, Heuristic::MinFill);
  CHECK(order.width == 1);
}

TEST_CASE("variables observed between decisions land between the max layers") {
  // D1 before D2; C observed by D2 only, so C is eliminated after D2's max
  // and before D1's max.
  InfluenceDiagram dg;
  dg.variables = {
      {0, "D1", VarKind::Decision, {"a", "b"}},
      {1, "C", VarKind::Chance, {"c0", "c1"}},
      {2, "D2", VarKind::Decision, {"a", "b"}},
      {3, "U", VarKind::Utility, {"u", "u_bar"}},
  };
  dg.cpts.resize(4);
  dg.decision_parents.resize(4);
  dg.cpts[1] = Cpt{{1, {0}}, {0.5, 0.5, 0.2, 0.8}};
  dg.cpts[3] = Cpt{{3, {0, 2}}, {1, 0, 0, 1, 0, 1, 1, 0}};
  dg.decision_parents[2] = {0, 1};
  dg.decision_order = {0, 2};

  auto order = constrained_order(dg);
  auto pos = [&](int v) {
    return std::find(order.sequence.begin(), order.sequence.end(), v) - order.sequence.begin();
  };
  CHECK(pos(3) < pos(2));  // U before D2
  CHECK(pos(2) < pos(1));  // D2 before C
  CHECK(pos(1) < pos(0));  // C before D1
}

TEST_CASE("umbrella compiles to the worked max-sum-product shape") {
  auto dg = testutil::umbrella();
  auto circuit = compile(dg, constrained_order(dg));

  const auto& root = circuit.nodes[static_cast<std::size_t>(circuit.root)];
  REQUIRE(root.kind == NodeKind::Max);
  CHECK(root.var == 1);
  CHECK(root.addr == 0);
  REQUIRE(root.children.size() == 2);

  for (std::int32_t child : root.children) {
    const auto& alt = circuit.nodes[static_cast<std::size_t>(child)];
    REQUIRE(alt.kind == NodeKind::Product);
    REQUIRE(alt.children.size() == 3);  // lambda_b, theta_b slot, sum over w
    CHECK(circuit.nodes[static_cast<std::size_t>(alt.children[0])].kind == NodeKind::Indicator);
    CHECK(circuit.nodes[static_cast<std::size_t>(alt.children[1])].kind == NodeKind::Parameter);
    const auto& sum_w = circuit.nodes[static_cast<std::size_t>(alt.children[2])];
    REQUIRE(sum_w.kind == NodeKind::Sum);
    REQUIRE(sum_w.children.size() == 2);
    for (std::int32_t wc : sum_w.children) {
      const auto& term = circuit.nodes[static_cast<std::size_t>(wc)];
      REQUIRE(term.kind == NodeKind::Product);
      REQUIRE(term.children.size() == 3);  // lambda_w, theta_w, sum over u
      const auto& sum_u = circuit.nodes[static_cast<std::size_t>(term.children[2])];
      REQUIRE(sum_u.kind == NodeKind::Sum);
      CHECK(sum_u.children.size() == 2);
    }
  }

  // One Max node per decision context, recorded for policy extraction.
  REQUIRE(circuit.decisions.size() == 1);
  REQUIRE(circuit.decisions[0].max_node.size() == 1);
  CHECK(circuit.decisions[0].max_node[0] == circuit.root);
}

TEST_CASE("belief networks compile to circuits with zero max nodes") {
  auto dg = testutil::umbrella_net();
  auto circuit = compile(dg, constrained_order(dg));
  for (const auto& n : circuit.nodes) CHECK(n.kind != NodeKind::Max);
  CHECK(circuit.decisions.empty());

  Evidence e;
  e.assignments[1] = 1;
  auto state = sweep_up(circuit, set_leaves(circuit, dg, e));
  CHECK(state.value[static_cast<std::size_t>(circuit.root)] ==
        doctest::Approx(0.3 * 0.2 + 0.7 * 0.6).epsilon(1e-12));
}

TEST_CASE("edge count bookkeeping matches the arena") {
  auto dg = testutil::umbrella();
  auto circuit = compile(dg, constrained_order(dg));
  std::size_t edges = 0;
  for (const auto& n : circuit.nodes) edges += n.children.size();
  CHECK(circuit.edge_count == edges);

  // Exactly one root: no node is unreachable, no node has the root as child.
  std::vector<bool> referenced(circuit.nodes.size(), false);
  for (const auto& n : circuit.nodes)
    for (auto c : n.children) referenced[static_cast<std::size_t>(c)] = true;
  int roots = 0;
  for (std::size_t i = 0; i < circuit.nodes.size(); ++i)
    if (!referenced[i]) ++roots;
  CHECK(roots == 1);
  CHECK_FALSE(referenced[static_cast<std::size_t>(circuit.root)]);
}

TEST_CASE("hash consing is sound and only shrinks circuits") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    testutil::RandomDiagramParams params;
    params.chance_vars = 4;
    params.decisions = trial % 3 == 0 ? 0 : 1;
    params.with_utility = params.decisions > 0;
    params.max_states = 3;
    auto dg = testutil::random_diagram(params, 500 + static_cast<std::uint64_t>(trial));
    auto order = constrained_order(dg);

    CompileOptions with, without;
    without.hash_consing = false;
    auto merged = compile(dg, order, with);
    auto plain = compile(dg, order, without);
    CHECK(merged.node_count() <= plain.node_count());

    Evidence prime;
    if (dg.utility_var() >= 0) prime.assignments[dg.utility_var()] = 0;
    auto sa = sweep_up(merged, set_leaves(merged, dg, prime));
    auto sb = sweep_up(plain, set_leaves(plain, dg, prime));
    sweep_down(merged, sa);
    sweep_down(plain, sb);
    CHECK(sa.value[static_cast<std::size_t>(merged.root)] ==
          sb.value[static_cast<std::size_t>(plain.root)]);
    for (const auto& v : dg.variables)
      for (int s = 0; s < v.card(); ++s)
        CHECK(partial_wrt_indicator(merged, sa, v.id, s) ==
              partial_wrt_indicator(plain, sb, v.id, s));
  }
}

TEST_CASE("forbidden alternatives never change the structure") {
  auto dg = testutil::umbrella();
  auto order = constrained_order(dg);
  auto plain = compile(dg, order);
  CompileOptions options;
  options.forbidden = {{1, 0, 1}};
  auto constrained = compile(dg, order, options);
  CHECK(plain.node_count() == constrained.node_count());
  CHECK(plain.edge_count == constrained.edge_count);
  CHECK(constrained.default_zero.size() == 1);
}

TEST_CASE("produced orders are always legal") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    testutil::RandomDiagramParams params;
    params.chance_vars = std::uniform_int_distribution<int>(2, 6)(rng);
    params.decisions = std::uniform_int_distribution<int>(0, 2)(rng);
    params.with_utility = true;
    auto dg = testutil::random_diagram(params, 700 + static_cast<std::uint64_t>(trial));
    for (auto h : {Heuristic::MinFill, Heuristic::MinDegree, Heuristic::AsGiven}) {
      auto order = constrained_order(dg, h);
      CHECK(order_is_legal(dg, order.sequence));
      CHECK(order.width == induced_width(dg, order.sequence));
      for (const auto& split : order.partitions) {
        CHECK(std::find(split.before.begin(), split.before.end(), dg.utility_var()) !=
              split.before.end());
        // Everything after D is an informational parent of D.
        const auto& parents = dg.parents_of(split.decision);
        for (int v : split.after)
          if (dg.var(v).kind != VarKind::Decision)
            CHECK(std::find(parents.begin(), parents.end(), v) != parents.end());
      }
    }
  }
}

TEST_CASE("illegal orders are refused") {
  auto dg = testutil::umbrella();
  EliminationOrder order;

  order.sequence = {0, 1, 2};  // utility after the decision
  CHECK_THROWS_AS(compile(dg, order), ValidationError);

  order.sequence = {2, 1, 0};  // unobserved W after the max
  CHECK_THROWS_AS(compile(dg, order), ValidationError);

  order.sequence = {2, 0};  // not a permutation
  CHECK_THROWS_AS(compile(dg, order), ValidationError);
}

TEST_CASE("compile commutes with direct numeric elimination") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    testutil::RandomDiagramParams params;
    params.chance_vars = std::uniform_int_distribution<int>(2, 4)(rng);
    params.decisions = std::uniform_int_distribution<int>(0, 2)(rng);
    params.max_states = 3;
    params.max_alternatives = 3;
    auto dg = testutil::random_diagram(params, 900 + static_cast<std::uint64_t>(trial));
    auto evidence = testutil::random_evidence(dg, rng);

    Evidence prime = evidence;
    if (dg.utility_var() >= 0) prime.assignments[dg.utility_var()] = 0;

    auto order = constrained_order(dg);
    auto circuit = compile(dg, order);
    auto state = sweep_up(circuit, set_leaves(circuit, dg, prime));

    double direct = testutil::numeric_ve_root(dg, order, prime);
    CHECK(state.value[static_cast<std::size_t>(circuit.root)] ==
          doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("treewidth report on the report-gathering diagram") {
  auto dg = load_diagram(testutil::fixture("weather_report.json"));
  auto rows = treewidth_report(dg);
  REQUIRE(rows.size() == 3);

  int minfill = 0, mindegree = 0;
  for (const auto& row : rows) {
    if (row.heuristic == Heuristic::MinFill) minfill = row.width;
    if (row.heuristic == Heuristic::MinDegree) mindegree = row.width;
  }
  CHECK(minfill <= mindegree);

  // Brute force over every legal order.
  std::vector<int> vars;
  for (const auto& v : dg.variables) vars.push_back(v.id);
  std::sort(vars.begin(), vars.end());
  int best = 1 << 20;
  do {
    if (order_is_legal(dg, vars)) best = std::min(best, induced_width(dg, vars));
  } while (std::next_permutation(vars.begin(), vars.end()));
  CHECK(minfill >= best);
  CHECK(best == 3);
  CHECK(minfill == 3);

  // Determinism of the report.
  auto again = treewidth_report(dg);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].width == again[i].width);
    CHECK(rows[i].nodes == again[i].nodes);
    CHECK(rows[i].edges == again[i].edges);
  }
}

TEST_CASE("isolated single chance variable has width zero") {
  InfluenceDiagram dg;
  dg.variables = {{0, "X", VarKind::Chance, {"x0", "x1"}}};
  dg.cpts.resize(1);
  dg.decision_parents.resize(1);
  dg.cpts[0] = Cpt{{0, {}}, {0.5, 0.5}};
  auto rows = treewidth_report(dg);
  for (const auto& row : rows) CHECK(row.width == 0);
}
