#pragma once

#include <string>
#include <vector>

#include "dcirc/model.hpp"

namespace dcirc {

// Diagram file format: a UTF-8 JSON object with keys
//   "variables":      [{"name", "kind": chance|decision|utility, "states"}]
//   "arcs":           [[parent, child], ...]  (listing order fixes parent order)
//   "cpts":           {name: flat row-major table, last parent fastest}
//   "utility":        {"node", "scale": {"min","max"}, "raw": flat table}
//                     (mutually exclusive with a direct cpt for that node)
//   "decision_order": [decision names]  (optional when <= 1 decision)
// Unknown keys are rejected. Parsing does not validate the diagram beyond
// what is needed to build it; run validate() afterwards.
InfluenceDiagram parse_diagram(const std::string& json_text);
InfluenceDiagram load_diagram(const std::string& path);

// "VAR=state" specs with names resolved against the diagram.
Evidence parse_evidence(const InfluenceDiagram& dg, const std::vector<std::string>& specs);

}  // namespace dcirc
