#pragma once

#include <string>
#include <vector>

#include "dcirc/circuit.hpp"
#include "dcirc/model.hpp"

namespace dcirc {

enum class Heuristic { MinFill, MinDegree, AsGiven };

const char* to_string(Heuristic h);

// A temporally constrained variable elimination order. Chance variables sit
// in blocks between decisions: everything never observed (including the
// utility node, which goes first in its block) is eliminated before the
// latest decision; a variable observed before decision D is eliminated only
// after D; decisions are eliminated in reverse temporal order.
struct EliminationOrder {
  std::vector<int> sequence;  // first eliminated first

  struct DecisionSplit {
    int decision = -1;
    std::vector<int> before;  // B_D plus the utility node
    std::vector<int> after;   // A_D
  };
  std::vector<DecisionSplit> partitions;

  int width = 0;  // max clique size minus one over all elimination steps
};

// Produces a legal order for a valid diagram; the heuristic picks variables
// within each temporal block, ties broken by lowest variable id. AsGiven
// uses ascending variable id within each block.
EliminationOrder constrained_order(const InfluenceDiagram& dg,
                                   Heuristic heuristic = Heuristic::MinFill);

struct CompileOptions {
  std::vector<ForbiddenAlternative> forbidden;  // theta_{d|u} fixed to 0
  bool hash_consing = true;
};

// Builds the decision circuit by pushing sums and maxes inward along the
// elimination order: initial factors hold Product(lambda, theta) monomials
// per family (decision slots included); eliminating a chance variable
// multiplies the factors that mention it and sums over its states;
// eliminating a decision multiplies and places one Max node per
// instantiation of its informational parents. A belief network compiles to
// an ordinary arithmetic circuit with zero Max nodes. Refuses orders that
// violate the diagram's temporal constraints.
Circuit compile(const InfluenceDiagram& dg, const EliminationOrder& order,
                const CompileOptions& options = {});

struct TreewidthRow {
  Heuristic heuristic;
  int width = 0;
  std::size_t nodes = 0;
  std::size_t edges = 0;
};

// Width and compiled circuit size for every implemented heuristic.
std::vector<TreewidthRow> treewidth_report(const InfluenceDiagram& dg);

}  // namespace dcirc
