#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcirc/circuit.hpp"
#include "dcirc/model.hpp"

namespace dcirc {

struct EvalOptions {
  std::vector<ForbiddenAlternative> forbidden;  // theta_{d|u} = 0
  std::vector<ExcludedAlternative> excluded;    // lambda_d = 0
  SweepOptions sweep;
};

struct EvaluationResult {
  double meu = 0.0;
  double root_value = 0.0;     // g*(e') or f(e')
  double prob_evidence = 0.0;  // P(e)
  Policy policy;

  // Full leaf derivative vectors; absent leaves report 0.
  std::vector<std::vector<double>> indicator_derivative;  // [var][state]
  std::vector<std::vector<double>> parameter_derivative;  // [var][family index]

  // Which semantics the derivatives carry: "max-argmax" (hard routing at Max
  // nodes), "theta-zeroed" (non-chosen alternatives forced to zero before
  // the sweeps), or "arithmetic" (no Max nodes involved).
  std::string derivative_semantics = "max-argmax";

  std::size_t edge_visits_up = 0;
  std::size_t edge_visits_down = 0;

  std::optional<std::uint64_t> strategy_id;  // set by the normal-form solver
};

// Decision Circuit Algorithm: initialize decision leaves, sweep once up and
// once down with e' = e + {U=1}, read the policy off the Max argmax slots and
// MEU = g*(e') / (dg/dlambda_u + dg/dlambda_ubar). Moot contexts (every Max
// child zero) are flagged and assigned the lowest feasible alternative.
// Throws: ValidationError (responsive or U-assigned evidence),
// InfeasibleDecisionError (a context with no feasible alternative),
// EvidenceImpossibleError (P(e) = 0).
EvaluationResult evaluate(const Circuit& circuit, const InfluenceDiagram& dg,
                          const Evidence& evidence, const EvalOptions& options = {});

// The same result computed under theta-zeroing semantics: the non-chosen
// alternatives of `policy` are zeroed before a fresh sweep pair. Agreement
// with evaluate() is a correctness cross-check, not an alternative path.
EvaluationResult evaluate_zeroed(const Circuit& circuit, const InfluenceDiagram& dg,
                                 const Evidence& evidence, const Policy& policy,
                                 const EvalOptions& options = {});

struct VoiResult {
  double value = 0.0;
  double base_meu = 0.0;
  std::vector<double> state_probability;  // P(x | e)
  std::vector<double> state_meu;          // MEU(e + {X=x}); 0 on zero branches
  std::vector<int> zero_probability_states;
};

// Value of observing `observation_var` before all decisions:
// sum_x P(x|e) MEU(e + {x}) - MEU(e). P(x|e) comes from a policy-free query
// evaluated on the same circuit with the optimal policy's parameters zeroed
// (probabilities of unresponsive variables do not depend on the policy).
VoiResult voi(const Circuit& circuit, const InfluenceDiagram& dg, const Evidence& base,
              int observation_var, const EvalOptions& options = {});

// Fixes every decision to its policy choice, turning the diagram into a
// belief network with deterministic 0/1 rows for the former decisions.
InfluenceDiagram to_policy_diagram(const InfluenceDiagram& dg, const Policy& policy);

struct PolicyQueryResult {
  double prob_evidence = 0.0;                      // P(e)
  std::vector<std::vector<double>> marginal;       // [var][x] = P(x, e - X)
  std::vector<std::vector<double>> family_joint;   // [var][addr] = P(x, u, e)
};

// Probabilistic queries on a compiled policy circuit, read off the partial
// derivatives of one sweep pair.
PolicyQueryResult query_policy_circuit(const Circuit& circuit, const InfluenceDiagram& policy_dg,
                                       const Evidence& evidence);

}  // namespace dcirc
