#pragma once

// Scenario file format: one JSON document per scenario with plant,
// controller and sim sections. Doubles survive the round trip (the JSON
// writer emits shortest-round-trip decimals). Parse and schema errors carry
// the file name and, for syntax errors, the line number.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "eic/hybridsim.hpp"
#include "eic/model.hpp"

namespace eic {

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Scenario {
  PlantSpec plant;
  ControllerSpec controller;
  Vec x0;
  SimParams sim;
  std::string outputs;  // output directory; empty means current directory
  std::string name;     // identity used in summaries
};

namespace detail {

using nlohmann::json;

inline std::size_t line_of_byte(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

inline const json& field(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end())
    throw ScenarioError(where + ": missing field '" + key + "'");
  return *it;
}

inline double num(const json& j, const char* key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_number()) throw ScenarioError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline Vec vec(const json& j, const char* key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_array()) throw ScenarioError(where + "." + key + ": expected an array");
  Vec out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) throw ScenarioError(where + "." + key + ": expected numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline Mat mat(const json& j, const char* key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_array() || v.empty() || !v[0].is_array())
    throw ScenarioError(where + "." + key + ": expected an array of rows");
  const std::size_t rows = v.size();
  const std::size_t cols = v[0].size();
  Mat out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!v[i].is_array() || v[i].size() != cols)
      throw ScenarioError(where + "." + key + ": ragged rows");
    for (std::size_t jx = 0; jx < cols; ++jx) {
      if (!v[i][jx].is_number())
        throw ScenarioError(where + "." + key + ": expected numbers");
      out(i, jx) = v[i][jx].get<double>();
    }
  }
  return out;
}

inline json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace detail

inline Scenario parse_scenario_text(const std::string& text, const std::string& origin) {
  using detail::field;
  using detail::mat;
  using detail::num;
  using detail::vec;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(origin + ":" + std::to_string(detail::line_of_byte(text, e.byte)) +
                        ": " + e.what());
  }

  Scenario sc;
  sc.name = origin;

  const auto& plant = field(j, "plant", origin);
  sc.plant.dim = static_cast<std::size_t>(num(plant, "dim", origin + ".plant"));
  const auto& drift = field(plant, "drift", origin + ".plant");
  if (!drift.is_string())
    throw ScenarioError(origin + ".plant.drift: expected a registered drift name");
  sc.plant.drift =
      RegisteredDrift{drift.get<std::string>(), vec(plant, "params", origin + ".plant")};

  const auto& ctrl = field(j, "controller", origin);
  const std::string topo =
      field(ctrl, "topology", origin + ".controller").get<std::string>();
  if (topo == "independent") {
    IndependentController c;
    c.B = mat(ctrl, "B", origin + ".controller");
    c.thetas = vec(ctrl, "thetas", origin + ".controller");
    c.lambdas = vec(ctrl, "lambdas", origin + ".controller");
    const auto& input = field(ctrl, "input_fn", origin + ".controller");
    const std::string kind =
        field(input, "kind", origin + ".controller.input_fn").get<std::string>();
    if (kind == "rectified_projection") {
      c.input = InputFn::rectified(
          mat(input, "directions", origin + ".controller.input_fn"),
          vec(input, "scales", origin + ".controller.input_fn"));
    } else if (kind == "custom") {
      c.input = InputFn::custom(
          field(input, "name", origin + ".controller.input_fn").get<std::string>());
    } else {
      throw ScenarioError(origin + ".controller.input_fn.kind: unknown kind '" + kind + "'");
    }
    sc.controller = ControllerSpec{c};
  } else if (topo == "connected") {
    ConnectedController c;
    c.B = mat(ctrl, "B", origin + ".controller");
    c.lambdas = vec(ctrl, "lambdas", origin + ".controller");
    c.gain = mat(ctrl, "gain", origin + ".controller");
    sc.controller = ControllerSpec{c};
  } else {
    throw ScenarioError(origin + ".controller.topology: expected 'independent' or 'connected'");
  }

  const auto& sim = field(j, "sim", origin);
  sc.x0 = vec(sim, "x0", origin + ".sim");
  sc.sim.T = num(sim, "T", origin + ".sim");
  sc.sim.dt = num(sim, "dt", origin + ".sim");
  sc.sim.event_tol = num(sim, "event_tol", origin + ".sim");
  if (sim.contains("guard")) sc.sim.guard = num(sim, "guard", origin + ".sim");
  if (j.contains("outputs")) sc.outputs = j["outputs"].get<std::string>();
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path + ": cannot open scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), path);
}

inline std::string scenario_to_json(const Scenario& sc) {
  using detail::mat_to_json;
  nlohmann::json j;
  j["plant"]["dim"] = sc.plant.dim;
  if (const auto* lin = std::get_if<LinearDrift>(&sc.plant.drift)) {
    j["plant"]["drift"] = "linear";
    j["plant"]["params"] = lin->A.a;
  } else {
    const auto& reg = std::get<RegisteredDrift>(sc.plant.drift);
    j["plant"]["drift"] = reg.name;
    j["plant"]["params"] = reg.params;
  }
  if (const auto* ind = std::get_if<IndependentController>(&sc.controller.topology)) {
    j["controller"]["topology"] = "independent";
    j["controller"]["B"] = mat_to_json(ind->B);
    j["controller"]["thetas"] = ind->thetas;
    j["controller"]["lambdas"] = ind->lambdas;
    if (ind->input.kind == InputFn::Kind::RectifiedProjection) {
      j["controller"]["input_fn"]["kind"] = "rectified_projection";
      j["controller"]["input_fn"]["directions"] = mat_to_json(ind->input.directions);
      j["controller"]["input_fn"]["scales"] = ind->input.scales;
    } else {
      j["controller"]["input_fn"]["kind"] = "custom";
      j["controller"]["input_fn"]["name"] = ind->input.name;
    }
  } else {
    const auto& con = std::get<ConnectedController>(sc.controller.topology);
    j["controller"]["topology"] = "connected";
    j["controller"]["B"] = mat_to_json(con.B);
    j["controller"]["lambdas"] = con.lambdas;
    j["controller"]["gain"] = mat_to_json(con.gain);
  }
  j["sim"]["x0"] = sc.x0;
  j["sim"]["T"] = sc.sim.T;
  j["sim"]["dt"] = sc.sim.dt;
  j["sim"]["event_tol"] = sc.sim.event_tol;
  if (sc.sim.guard != 1e12) j["sim"]["guard"] = sc.sim.guard;
  if (!sc.outputs.empty()) j["outputs"] = sc.outputs;
  return j.dump(2);
}

}  // namespace eic
