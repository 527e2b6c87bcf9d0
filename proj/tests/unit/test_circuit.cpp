#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include "dcirc/circuit.hpp"
#include "dcirc/compiler.hpp"
#include "dcirc/errors.hpp"
#include "dcirc/oracle.hpp"
#include "testutil.hpp"

using namespace dcirc;

namespace {

// Hand-built multi-linear circuit for the weather/umbrella network:
// f = sum over (w, b) of lambda_w lambda_b theta_w theta_{b|w}.
struct UmbrellaNetCircuit {
  Circuit circuit;
  InfluenceDiagram dg = testutil::umbrella_net();

  UmbrellaNetCircuit() {
    auto& c = circuit;
    c.indicator_node = {{0, 1}, {2, 3}};
    c.parameter_node = {{4, 5}, {6, 7, 8, 9}};
    c.var_names = {"W", "B"};
    c.state_names = {{"w", "w_bar"}, {"b", "b_bar"}};
    c.nodes = {
        {NodeKind::Indicator, 0, 0, 0, {}}, {NodeKind::Indicator, 0, 1, 0, {}},
        {NodeKind::Indicator, 1, 0, 0, {}}, {NodeKind::Indicator, 1, 1, 0, {}},
        {NodeKind::Parameter, 0, 0, 0, {}}, {NodeKind::Parameter, 0, 1, 0, {}},
        {NodeKind::Parameter, 1, 0, 0, {}}, {NodeKind::Parameter, 1, 1, 0, {}},
        {NodeKind::Parameter, 1, 2, 0, {}}, {NodeKind::Parameter, 1, 3, 0, {}},
        {NodeKind::Product, -1, -1, 0, {0, 2, 4, 6}},  // w, b
        {NodeKind::Product, -1, -1, 0, {0, 3, 4, 7}},  // w, b_bar
        {NodeKind::Product, -1, -1, 0, {1, 2, 5, 8}},  // w_bar, b
        {NodeKind::Product, -1, -1, 0, {1, 3, 5, 9}},  // w_bar, b_bar
        {NodeKind::Sum, -1, -1, 0, {10, 11, 12, 13}},
    };
    c.root = 14;
    for (const auto& n : c.nodes) c.edge_count += n.children.size();
  }
};

}  // namespace

TEST_CASE("upward pass evaluates the multi-linear function") {
  UmbrellaNetCircuit f;

  SUBCASE("no evidence gives probability one") {
    auto leaves = set_leaves(f.circuit, f.dg, {});
    auto state = sweep_up(f.circuit, leaves);
    CHECK(state.value[14] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(state.edge_visits_up == f.circuit.edge_count);
  }

  SUBCASE("evidence b_bar zeroes the b indicator and returns P(b_bar)") {
    Evidence e;
    e.assignments[1] = 1;
    auto leaves = set_leaves(f.circuit, f.dg, e);
    CHECK(leaves.value[2] == 0.0);
    CHECK(leaves.value[0] == 1.0);
    CHECK(leaves.value[1] == 1.0);
    CHECK(leaves.value[3] == 1.0);
    auto state = sweep_up(f.circuit, leaves);
    // theta_w theta_{b_bar|w} + theta_{w_bar} theta_{b_bar|w_bar}
    CHECK(state.value[14] == doctest::Approx(0.3 * 0.2 + 0.7 * 0.6).epsilon(1e-12));
  }
}

TEST_CASE("downward pass satisfies the derivative identities") {
  UmbrellaNetCircuit f;
  auto leaves = set_leaves(f.circuit, f.dg, {});
  auto state = sweep_up(f.circuit, leaves);
  sweep_down(f.circuit, state);
  CHECK(state.edge_visits_down == f.circuit.edge_count);

  // Root derivative is 1 by definition.
  CHECK(state.derivative[14] == 1.0);

  // df/dlambda_b(empty) = P(b): the marginal with B retracted.
  double p_b = 0.3 * 0.8 + 0.7 * 0.4;
  CHECK(partial_wrt_indicator(f.circuit, state, 1, 0) == doctest::Approx(p_b).epsilon(1e-12));

  // The retracted sum is P(empty) = 1 for every variable.
  CHECK(retracted_probability(f.circuit, state, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(retracted_probability(f.circuit, state, 1) == doctest::Approx(1.0).epsilon(1e-12));

  // theta_{b|w} df/dtheta_{b|w} = P(b, w): the family joint.
  double lhs = 0.8 * partial_wrt_parameter(f.circuit, state, 1, 0);
  CHECK(lhs == doctest::Approx(0.3 * 0.8).epsilon(1e-12));
}

TEST_CASE("derivative identities hold against enumeration on random networks") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    testutil::RandomDiagramParams params;
    params.chance_vars = std::uniform_int_distribution<int>(2, 5)(rng);
    params.decisions = 0;
    params.max_states = 3;
    params.with_utility = false;
    auto dg = testutil::random_diagram(params, 100 + static_cast<std::uint64_t>(trial));
    auto evidence = testutil::random_evidence(dg, rng);

    auto circuit = compile(dg, constrained_order(dg));
    auto leaves = set_leaves(circuit, dg, evidence);
    auto state = sweep_up(circuit, leaves);
    sweep_down(circuit, state);

    CHECK(state.value[static_cast<std::size_t>(circuit.root)] ==
          doctest::Approx(oracle_query(dg, evidence)).epsilon(1e-9));

    for (const auto& v : dg.variables) {
      auto marginal = oracle_marginal(dg, evidence, v.id);
      for (int x = 0; x < v.card(); ++x)  // single-variable marginal
        CHECK(partial_wrt_indicator(circuit, state, v.id, x) ==
              doctest::Approx(marginal[static_cast<std::size_t>(x)]).epsilon(1e-9));

      Evidence retracted = evidence;  // retracted evidence probability
      retracted.assignments.erase(v.id);
      CHECK(retracted_probability(circuit, state, v.id) ==
            doctest::Approx(oracle_query(dg, retracted)).epsilon(1e-9));

      auto joint = oracle_family_joint(dg, evidence, v.id);  // family joint
      const auto& cpt = dg.cpts[static_cast<std::size_t>(v.id)];
      for (std::size_t a = 0; a < joint.size(); ++a)
        CHECK(cpt->table[a] * partial_wrt_parameter(circuit, state, v.id, a) ==
              doctest::Approx(joint[a]).epsilon(1e-9));
    }
  }
}

TEST_CASE("leaf derivatives equal central finite differences") {
  std::mt19937_64 rng(12);
  testutil::RandomDiagramParams params;
  params.chance_vars = 4;
  params.decisions = 0;
  params.max_states = 3;
  params.with_utility = false;
  auto dg = testutil::random_diagram(params, 55);
  auto evidence = testutil::random_evidence(dg, rng);

  auto circuit = compile(dg, constrained_order(dg));
  auto leaves = set_leaves(circuit, dg, evidence);
  auto state = sweep_up(circuit, leaves);
  sweep_down(circuit, state);

  const double h = 1e-5;
  for (std::size_t n = 0; n < circuit.nodes.size(); ++n) {
    if (!circuit.is_leaf(static_cast<std::int32_t>(n))) continue;
    auto plus = leaves, minus = leaves;
    plus.value[n] += h;
    minus.value[n] = std::max(0.0, minus.value[n] - h);
    double used_h = (plus.value[n] - minus.value[n]) / 2.0;
    double fd = (sweep_up(circuit, plus).value[static_cast<std::size_t>(circuit.root)] -
                 sweep_up(circuit, minus).value[static_cast<std::size_t>(circuit.root)]) /
                (2.0 * used_h);
    double analytic = state.derivative[n];
    CHECK(fd == doctest::Approx(analytic).epsilon(1e-6));
  }
}

TEST_CASE("zero-aware product differentiation") {
  Circuit c;
  c.indicator_node = {{0, 1, 2}};
  c.parameter_node = {{}};
  c.nodes = {
      {NodeKind::Indicator, 0, 0, 0, {}},
      {NodeKind::Indicator, 0, 1, 0, {}},
      {NodeKind::Indicator, 0, 2, 0, {}},
      {NodeKind::Product, -1, -1, 0, {0, 1, 2}},
  };
  c.root = 3;
  c.edge_count = 3;

  LeafAssignment leaves;
  SUBCASE("one zero child gets the sibling product; the rest get zero") {
    leaves.value = {0.0, 0.5, 0.25, 0.0};
    auto state = sweep_up(c, leaves);
    CHECK(state.value[3] == 0.0);
    sweep_down(c, state);
    CHECK(state.derivative[0] == doctest::Approx(0.125));
    CHECK(state.derivative[1] == 0.0);
    CHECK(state.derivative[2] == 0.0);
  }
  SUBCASE("two zero children kill every partial") {
    leaves.value = {0.0, 0.0, 0.25, 0.0};
    auto state = sweep_up(c, leaves);
    sweep_down(c, state);
    CHECK(state.derivative[0] == 0.0);
    CHECK(state.derivative[1] == 0.0);
    CHECK(state.derivative[2] == 0.0);
  }
  SUBCASE("no zero children: partial is the product over siblings") {
    leaves.value = {0.5, 0.5, 0.25, 0.0};
    auto state = sweep_up(c, leaves);
    sweep_down(c, state);
    CHECK(state.derivative[0] == doctest::Approx(0.125));
    CHECK(state.derivative[2] == doctest::Approx(0.25));
  }
}

namespace {

// Max over three products sharing a scale leaf; leaf values come from a
// hand-rolled assignment.
Circuit max_scale_circuit() {
  Circuit c;
  c.indicator_node = {{0, 1, 2, 3}};
  c.parameter_node = {{}};
  c.nodes = {
      {NodeKind::Indicator, 0, 0, 0, {}},  // scale
      {NodeKind::Indicator, 0, 1, 0, {}},
      {NodeKind::Indicator, 0, 2, 0, {}},
      {NodeKind::Indicator, 0, 3, 0, {}},
      {NodeKind::Product, -1, -1, 0, {0, 1}},
      {NodeKind::Product, -1, -1, 0, {0, 2}},
      {NodeKind::Product, -1, -1, 0, {0, 3}},
      {NodeKind::Max, 0, 0, 0, {4, 5, 6}},
  };
  c.root = 7;
  c.edge_count = 9;
  c.decisions.push_back({0, {7}});
  return c;
}

}  // namespace

TEST_CASE("max argmax is invariant under positive scaling of its children") {
  auto c = max_scale_circuit();
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> draw(0.1, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    double v1 = draw(rng), v2 = draw(rng), v3 = draw(rng);
    LeafAssignment base;
    base.value = {1.0, v1, v2, v3, 0, 0, 0, 0};
    auto ref = sweep_up(c, base);

    for (double scale : {0.5, 2.0, 1024.0, 0.37, 9.75e-3}) {
      LeafAssignment scaled = base;
      scaled.value[0] = scale;
      auto state = sweep_up(c, scaled);
      CHECK(state.argmax_child[7] == ref.argmax_child[7]);
    }
  }
}

TEST_CASE("max ties break toward the lowest child position") {
  auto c = max_scale_circuit();
  LeafAssignment leaves;
  leaves.value = {1.0, 0.5, 0.5, 0.25, 0, 0, 0, 0};
  auto state = sweep_up(c, leaves);
  CHECK(state.argmax_child[7] == 0);

  // Relative-epsilon mode treats near-equal values as tied.
  leaves.value = {1.0, 0.5, 0.5 * (1.0 + 1e-14), 0.25, 0, 0, 0, 0};
  auto exact = sweep_up(c, leaves);
  CHECK(exact.argmax_child[7] == 1);
  SweepOptions eps;
  eps.tie_rel_eps = 1e-12;
  auto fuzzy = sweep_up(c, leaves, eps);
  CHECK(fuzzy.argmax_child[7] == 0);
}

TEST_CASE("max derivative flows only along the argmax child") {
  auto c = max_scale_circuit();
  LeafAssignment leaves;
  leaves.value = {1.0, 0.2, 0.9, 0.4, 0, 0, 0, 0};
  auto state = sweep_up(c, leaves);
  CHECK(state.argmax_child[7] == 1);
  sweep_down(c, state);
  CHECK(state.derivative[5] == 1.0);
  CHECK(state.derivative[4] == 0.0);
  CHECK(state.derivative[6] == 0.0);
  // Through the chosen product, d/d(scale) = v2 and d/d(v2) = scale.
  CHECK(state.derivative[2] == doctest::Approx(1.0));
  CHECK(state.derivative[0] == doctest::Approx(0.9));
}

TEST_CASE("leaf errors are rejected") {
  UmbrellaNetCircuit f;
  auto leaves = set_leaves(f.circuit, f.dg, {});

  SUBCASE("negative leaf") {
    leaves.value[4] = -0.1;
    CHECK_THROWS_AS(sweep_up(f.circuit, leaves), NumericDomainError);
  }
  SUBCASE("nan leaf") {
    leaves.value[4] = std::nan("");
    CHECK_THROWS_AS(sweep_up(f.circuit, leaves), NumericDomainError);
  }
  SUBCASE("override on an absent leaf") {
    CHECK_THROWS_AS(set_leaves(f.circuit, f.dg, {}, {{{NodeKind::Parameter, 1, 17}, 0.0}}),
                    AddressError);
  }
  SUBCASE("override on an existing leaf") {
    auto overridden = set_leaves(f.circuit, f.dg, {}, {{{NodeKind::Indicator, 1, 0}, 0.0}});
    CHECK(overridden.value[2] == 0.0);
  }
}

TEST_CASE("differentiating before evaluating is an error") {
  UmbrellaNetCircuit f;
  SweepState fresh;
  fresh.value.assign(f.circuit.nodes.size(), 0.0);
  CHECK_THROWS_AS(sweep_down(f.circuit, fresh), Error);
}

TEST_CASE("pruned leaves report zero with a flag") {
  UmbrellaNetCircuit f;
  auto leaves = set_leaves(f.circuit, f.dg, {});
  auto state = sweep_up(f.circuit, leaves);
  sweep_down(f.circuit, state);
  bool present = true;
  CHECK(partial_wrt_parameter(f.circuit, state, 0, 9, &present) == 0.0);
  CHECK_FALSE(present);
  partial_wrt_indicator(f.circuit, state, 0, 0, &present);
  CHECK(present);
}

TEST_CASE("export_graph is deterministic and self-describing") {
  SUBCASE("single constant circuit dumps two lines") {
    Circuit c;
    c.nodes = {{NodeKind::Constant, -1, -1, 0.25, {}}};
    c.root = 0;
    auto text = export_graph(c);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    CHECK(text.find("const") != std::string::npos);
    CHECK(text.find("0.25") != std::string::npos);
  }
  SUBCASE("re-export of the same circuit is byte-identical") {
    UmbrellaNetCircuit f;
    CHECK(export_graph(f.circuit) == export_graph(f.circuit));
  }
  SUBCASE("header reports node and edge counts") {
    UmbrellaNetCircuit f;
    auto text = export_graph(f.circuit);
    CHECK(text.find("circuit nodes=15 edges=20 root=14") == 0);
    CHECK(text.find("lambda(W=w)") != std::string::npos);
  }
}

TEST_CASE("one compiled circuit serves concurrent evaluations") {
  testutil::RandomDiagramParams params;
  params.chance_vars = 5;
  params.decisions = 2;
  params.max_states = 3;
  auto dg = testutil::random_diagram(params, 88);
  auto circuit = compile(dg, constrained_order(dg));

  Evidence prime;
  prime.assignments[dg.utility_var()] = 0;
  auto leaves = set_leaves(circuit, dg, prime);
  auto reference = sweep_up(circuit, leaves);
  sweep_down(circuit, reference);

  std::vector<std::thread> workers;
  std::vector<double> roots(8, 0.0);
  std::vector<double> derivs(8, 0.0);
  for (int t = 0; t < 8; ++t) {
    workers.emplace_back([&, t] {
      auto state = sweep_up(circuit, leaves);
      sweep_down(circuit, state);
      roots[static_cast<std::size_t>(t)] = state.value[static_cast<std::size_t>(circuit.root)];
      derivs[static_cast<std::size_t>(t)] = state.derivative[0];
    });
  }
  for (auto& w : workers) w.join();
  for (int t = 0; t < 8; ++t) {
    CHECK(roots[static_cast<std::size_t>(t)] ==
          reference.value[static_cast<std::size_t>(circuit.root)]);
    CHECK(derivs[static_cast<std::size_t>(t)] == reference.derivative[0]);
  }
}

TEST_CASE("each sweep touches every edge exactly once") {
  testutil::RandomDiagramParams params;
  params.chance_vars = 5;
  params.decisions = 1;
  auto dg = testutil::random_diagram(params, 77);
  auto circuit = compile(dg, constrained_order(dg));

  Evidence prime;
  prime.assignments[dg.utility_var()] = 0;
  auto leaves = set_leaves(circuit, dg, prime);
  auto state = sweep_up(circuit, leaves);
  CHECK(state.edge_visits_up == circuit.edge_count);
  sweep_down(circuit, state);
  CHECK(state.edge_visits_down == circuit.edge_count);
}
