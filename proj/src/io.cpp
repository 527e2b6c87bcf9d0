#include "dcirc/io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dcirc/errors.hpp"

namespace dcirc {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& object, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    (void)value;
    if (!allowed.count(key))
      throw ParseError("unknown key '" + key + "' in " + where);
  }
}

VarKind parse_kind(const std::string& kind) {
  if (kind == "chance") return VarKind::Chance;
  if (kind == "decision") return VarKind::Decision;
  if (kind == "utility") return VarKind::Utility;
  throw ParseError("unknown variable kind '" + kind + "'");
}

std::vector<double> parse_table(const json& array, const std::string& where) {
  if (!array.is_array()) throw ParseError(where + " must be an array of numbers");
  std::vector<double> table;
  table.reserve(array.size());
  for (const auto& v : array) {
    if (!v.is_number()) throw ParseError(where + " must contain only numbers");
    table.push_back(v.get<double>());
  }
  return table;
}

}  // namespace

InfluenceDiagram parse_diagram(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("diagram file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("diagram file must contain a JSON object");
  reject_unknown_keys(doc, {"variables", "arcs", "cpts", "utility", "decision_order"},
                      "diagram");
  if (!doc.contains("variables")) throw ParseError("diagram is missing 'variables'");

  InfluenceDiagram dg;
  for (const auto& entry : doc["variables"]) {
    if (!entry.is_object()) throw ParseError("'variables' entries must be objects");
    reject_unknown_keys(entry, {"name", "kind", "states"}, "variable");
    Variable v;
    v.id = dg.var_count();
    v.name = entry.at("name").get<std::string>();
    v.kind = parse_kind(entry.at("kind").get<std::string>());
    for (const auto& s : entry.at("states")) v.states.push_back(s.get<std::string>());
    if (dg.find_var(v.name) >= 0) throw ParseError("duplicate variable '" + v.name + "'");
    dg.variables.push_back(std::move(v));
  }
  dg.cpts.resize(dg.variables.size());
  dg.decision_parents.resize(dg.variables.size());

  // Arc listing order fixes the parent order, and with it the table layout.
  std::vector<std::vector<int>> parents(dg.variables.size());
  if (doc.contains("arcs")) {
    for (const auto& arc : doc["arcs"]) {
      if (!arc.is_array() || arc.size() != 2)
        throw ParseError("'arcs' entries must be [parent, child] pairs");
      int p = dg.find_var(arc[0].get<std::string>());
      int c = dg.find_var(arc[1].get<std::string>());
      if (p < 0) throw ParseError("arc names unknown variable '" + arc[0].get<std::string>() + "'");
      if (c < 0) throw ParseError("arc names unknown variable '" + arc[1].get<std::string>() + "'");
      parents[static_cast<std::size_t>(c)].push_back(p);
    }
  }
  for (const auto& v : dg.variables)
    if (v.kind == VarKind::Decision)
      dg.decision_parents[static_cast<std::size_t>(v.id)] = parents[static_cast<std::size_t>(v.id)];

  std::set<std::string> cpt_names;
  if (doc.contains("cpts")) {
    if (!doc["cpts"].is_object()) throw ParseError("'cpts' must be an object");
    for (const auto& [name, table] : doc["cpts"].items()) {
      int id = dg.find_var(name);
      if (id < 0) throw ParseError("cpts names unknown variable '" + name + "'");
      if (dg.var(id).kind == VarKind::Decision)
        throw ParseError("decision '" + name + "' must not carry a CPT");
      cpt_names.insert(name);
      Cpt cpt;
      cpt.family.child = id;
      cpt.family.parents = parents[static_cast<std::size_t>(id)];
      cpt.table = parse_table(table, "cpt of '" + name + "'");
      dg.cpts[static_cast<std::size_t>(id)] = std::move(cpt);
    }
  }

  if (doc.contains("utility")) {
    const auto& u = doc["utility"];
    if (!u.is_object()) throw ParseError("'utility' must be an object");
    reject_unknown_keys(u, {"node", "scale", "raw"}, "utility");
    std::string name = u.at("node").get<std::string>();
    int id = dg.find_var(name);
    if (id < 0) throw ParseError("utility names unknown variable '" + name + "'");
    if (dg.var(id).kind != VarKind::Utility)
      throw ParseError("utility block names non-utility variable '" + name + "'");
    if (cpt_names.count(name))
      throw ParseError("utility node '" + name + "' has both a cpt and a utility block");
    const auto& scale = u.at("scale");
    reject_unknown_keys(scale, {"min", "max"}, "utility scale");
    UtilityScale us{scale.at("min").get<double>(), scale.at("max").get<double>()};
    Family family{id, parents[static_cast<std::size_t>(id)]};
    auto raw = parse_table(u.at("raw"), "utility raw table");
    dg.cpts[static_cast<std::size_t>(id)] = normalize_utilities(dg, family, raw, us);
    dg.scale = us;
  }

  if (doc.contains("decision_order")) {
    for (const auto& name : doc["decision_order"]) {
      int id = dg.find_var(name.get<std::string>());
      if (id < 0)
        throw ParseError("decision_order names unknown variable '" + name.get<std::string>() + "'");
      dg.decision_order.push_back(id);
    }
  }
  return dg;
}

InfluenceDiagram load_diagram(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open diagram file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_diagram(buffer.str());
}

Evidence parse_evidence(const InfluenceDiagram& dg, const std::vector<std::string>& specs) {
  Evidence evidence;
  for (const auto& spec : specs) {
    auto eq = spec.find('=');
    if (eq == std::string::npos)
      throw ParseError("evidence '" + spec + "' is not of the form VAR=state");
    std::string var_name = spec.substr(0, eq);
    std::string state_name = spec.substr(eq + 1);
    int id = dg.find_var(var_name);
    if (id < 0) throw ParseError("evidence names unknown variable '" + var_name + "'");
    const auto& states = dg.var(id).states;
    auto it = std::find(states.begin(), states.end(), state_name);
    if (it == states.end())
      throw ParseError("evidence names unknown state '" + state_name + "' of '" + var_name + "'");
    evidence.assignments[id] = static_cast<int>(it - states.begin());
  }
  return evidence;
}

}  // namespace dcirc
