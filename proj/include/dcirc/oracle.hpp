#pragma once

#include <cstdint>
#include <vector>

#include "dcirc/model.hpp"

namespace dcirc {

// Ground truth by exhaustive enumeration. Deliberately naive: a flat walk
// over every strategy and every joint instantiation, accumulated in
// lexicographic order so identical inputs give bit-identical outputs. Shares
// nothing with the circuit path beyond the model types.

struct OracleOptions {
  // Refuse when strategies * joint instantiations exceeds this.
  std::uint64_t instantiation_cap = 10'000'000;
  // Strategies within this absolute distance of the maximum belong to the
  // argmax set (tie-aware comparisons; see notes in the ledger).
  double argmax_tolerance = 1e-9;
};

struct OracleMeu {
  double meu = 0.0;
  std::vector<std::uint64_t> argmax;  // every maximizing strategy id
  std::uint64_t strategy_count = 0;
};

// Enumerates every strategy and returns max_s P(U=1 | s, e). Strategy ids
// use the same mixed-radix encoding as the normal-form module: decisions in
// temporal order, parent instantiations in canonical row order, alternatives
// as digits, the last digit varying fastest.
OracleMeu oracle_meu(const InfluenceDiagram& dg, const Evidence& evidence,
                     const OracleOptions& options = {});

// Same, restricted to strategies that never pick a forbidden or excluded
// alternative.
OracleMeu oracle_meu_constrained(const InfluenceDiagram& dg, const Evidence& evidence,
                                 const std::vector<ForbiddenAlternative>& forbidden,
                                 const std::vector<ExcludedAlternative>& excluded,
                                 const OracleOptions& options = {});

// Expected utility P(U=1 | policy, e) of one fixed policy.
double oracle_policy_value(const InfluenceDiagram& dg, const Evidence& evidence,
                           const Policy& policy, const OracleOptions& options = {});

// P(e) on a pure belief network (no decisions).
double oracle_query(const InfluenceDiagram& network, const Evidence& evidence,
                    const OracleOptions& options = {});

// P(x, e - X) for every state x of `var`: the marginal with X retracted.
std::vector<double> oracle_marginal(const InfluenceDiagram& network, const Evidence& evidence,
                                    int var, const OracleOptions& options = {});

// P(x, u, e) for every family instantiation of `child`, flat in canonical
// family order.
std::vector<double> oracle_family_joint(const InfluenceDiagram& network, const Evidence& evidence,
                                        int child, const OracleOptions& options = {});

}  // namespace dcirc
