#pragma once

#include <cstdint>
#include <vector>

#include "dcirc/compiler.hpp"
#include "dcirc/evaluator.hpp"
#include "dcirc/model.hpp"

namespace dcirc {

// Strategy ids are mixed-radix numbers: one digit per (decision, parent
// instantiation) pair, decisions in temporal order, instantiations in
// canonical row order, and the last digit varying fastest. Digit values are
// alternative indices. The oracle implements the identical encoding
// independently.
struct StrategyCodec {
  struct Slot {
    int decision = -1;
    std::size_t contexts = 0;
    int alternatives = 0;
  };
  std::vector<Slot> slots;  // temporal order

  static StrategyCodec over(const InfluenceDiagram& dg);

  std::uint64_t count() const;  // N_S, overflow-checked
  std::vector<std::vector<int>> decode(std::uint64_t id) const;
  std::uint64_t encode(const std::vector<std::vector<int>>& choices) const;

  Policy to_policy(std::uint64_t id) const;
  std::uint64_t from_policy(const Policy& policy) const;
};

// The diagram with all decisions replaced by deterministic functions of a
// uniform strategy variable S; a pure belief network.
struct NormalFormDiagram {
  InfluenceDiagram network;
  int strategy_var = -1;
  StrategyCodec codec;
};

struct NormalFormOptions {
  std::uint64_t strategy_cap = 1'000'000;
  Heuristic heuristic = Heuristic::MinFill;
};

// Refuses with the computed N_S when it exceeds the cap.
NormalFormDiagram to_normal_form(const InfluenceDiagram& dg, const NormalFormOptions& options = {});

// Normal Form Algorithm: compile the converted network to an arithmetic
// circuit, sweep with e' = e + {U=1}, then s* = argmax_s df/dlambda_s(e')
// (ties toward the lowest id) and MEU = df/dlambda_{s*} * N_S / P(e).
EvaluationResult solve_normal_form(const InfluenceDiagram& dg, const Evidence& evidence,
                                   const NormalFormOptions& options = {});

}  // namespace dcirc
