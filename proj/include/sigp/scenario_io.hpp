// Scenario files: versioned JSON documents carrying the Scenario schema.
// Saving a loaded scenario reproduces every resolved value, which is what
// makes the resolved-config snapshot a reproduction recipe.
#pragma once

#include "sigp/simulator.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <string>

namespace sigp {

using ordered_json = nlohmann::ordered_json;

inline ordered_json scenario_to_json(const Scenario& s) {
  ordered_json j;
  j["schema_version"] = s.schema_version;
  j["name"] = s.name;
  j["planner_name"] = s.planner_name;
  j["seed"] = s.seed;
  j["workspace"] = {{"xmin", s.workspace.xmin},
                    {"xmax", s.workspace.xmax},
                    {"ymin", s.workspace.ymin},
                    {"ymax", s.workspace.ymax}};
  j["robot"] = {{"start", {s.robot_start.x(), s.robot_start.y()}},
                {"goal", {s.robot_goal.x(), s.robot_goal.y()}},
                {"max_speed", s.robot_max_speed},
                {"goal_tolerance", s.goal_tolerance}};
  j["sim"] = {{"dt", s.dt},
              {"max_steps", s.max_steps},
              {"collision_radius", s.collision_radius},
              {"obs_dropout", s.obs_dropout},
              {"obs_noise", s.obs_noise},
              {"max_degraded", s.max_degraded},
              {"reactive_gain", s.reactive_gain},
              {"reactive_range", s.reactive_range}};
  if (std::isfinite(s.robot_max_accel)) j["sim"]["robot_max_accel"] = s.robot_max_accel;
  j["agents"] = ordered_json::array();
  for (const auto& a : s.agents) {
    ordered_json ja;
    ja["id"] = a.id;
    switch (a.mode) {
      case AgentScript::Mode::waypoint: ja["mode"] = "waypoint"; break;
      case AgentScript::Mode::replay: ja["mode"] = "replay"; break;
      case AgentScript::Mode::reactive: ja["mode"] = "reactive"; break;
    }
    ja["speed"] = a.speed;
    if (!a.waypoints.empty()) {
      ja["waypoints"] = ordered_json::array();
      for (const auto& w : a.waypoints) ja["waypoints"].push_back({w.x(), w.y()});
    }
    if (!a.replay.empty()) {
      ja["replay"] = ordered_json::array();
      for (const auto& r : a.replay) ja["replay"].push_back({r.step, r.pos.x(), r.pos.y()});
    }
    j["agents"].push_back(std::move(ja));
  }
  const PlannerConfig& p = s.planner;
  j["planner"] = {{"samples_per_agent", p.samples_per_agent},
                  {"alpha", {p.alpha_min, p.alpha_max}},
                  {"horizon", p.horizon},
                  {"include_ped_ped", p.include_ped_ped},
                  {"obs_window", p.obs_window},
                  {"goal_slack", p.goal_slack},
                  {"trend_slack", p.trend_slack},
                  {"indep_penalty_gain", p.indep_penalty_gain},
                  {"indep_progress_gain", p.indep_progress_gain},
                  {"top_k", p.top_k},
                  {"seed", p.seed},
                  {"kernel",
                   {{"signal_variance", p.kernel.signal_variance},
                    {"length_scale", p.kernel.length_scale},
                    {"noise_variance", p.kernel.noise_variance}}}};
  if (std::isfinite(p.prune_threshold)) j["planner"]["prune_threshold"] = p.prune_threshold;
  return j;
}

namespace detail {

inline Vec2 parse_vec2(const ordered_json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2)
    throw Error("scenario: " + what + " must be a [x, y] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline Scenario scenario_from_json(const ordered_json& j) {
  Scenario s;
  try {
    if (!j.contains("schema_version")) throw Error("scenario: missing schema_version");
    s.schema_version = j.at("schema_version").get<int>();
    if (s.schema_version != 1)
      throw Error("scenario: unsupported schema_version " + std::to_string(s.schema_version));
    s.name = j.value("name", std::string("scenario"));
    s.planner_name = j.value("planner_name", std::string("sigp"));
    s.seed = j.value("seed", std::uint64_t{1});

    const auto& w = j.at("workspace");
    s.workspace = {w.at("xmin").get<double>(), w.at("xmax").get<double>(),
                   w.at("ymin").get<double>(), w.at("ymax").get<double>()};

    const auto& r = j.at("robot");
    s.robot_start = detail::parse_vec2(r.at("start"), "robot.start");
    s.robot_goal = detail::parse_vec2(r.at("goal"), "robot.goal");
    s.robot_max_speed = r.value("max_speed", 1.5);
    s.goal_tolerance = r.value("goal_tolerance", 0.3);

    if (j.contains("sim")) {
      const auto& sim = j.at("sim");
      s.dt = sim.value("dt", 0.1);
      s.max_steps = sim.value("max_steps", 300);
      s.collision_radius = sim.value("collision_radius", 0.25);
      s.obs_dropout = sim.value("obs_dropout", 0.0);
      s.obs_noise = sim.value("obs_noise", 0.0);
      s.max_degraded = sim.value("max_degraded", 5);
      s.reactive_gain = sim.value("reactive_gain", 1.2);
      s.reactive_range = sim.value("reactive_range", 1.0);
      s.robot_max_accel =
          sim.value("robot_max_accel", std::numeric_limits<double>::infinity());
    }

    for (const auto& ja : j.value("agents", ordered_json::array())) {
      AgentScript a;
      a.id = ja.at("id").get<std::string>();
      const std::string mode = ja.value("mode", std::string("waypoint"));
      if (mode == "waypoint")
        a.mode = AgentScript::Mode::waypoint;
      else if (mode == "replay")
        a.mode = AgentScript::Mode::replay;
      else if (mode == "reactive")
        a.mode = AgentScript::Mode::reactive;
      else
        throw Error("scenario: agent " + a.id + " has unknown mode '" + mode + "'");
      a.speed = ja.value("speed", 1.3);
      for (const auto& wp : ja.value("waypoints", ordered_json::array()))
        a.waypoints.push_back(detail::parse_vec2(wp, "agent waypoint"));
      for (const auto& row : ja.value("replay", ordered_json::array())) {
        if (!row.is_array() || row.size() != 3)
          throw Error("scenario: replay rows are [step, x, y] triples");
        a.replay.push_back({row[0].get<int>(), {row[1].get<double>(), row[2].get<double>()}});
      }
      s.agents.push_back(std::move(a));
    }

    if (j.contains("planner")) {
      const auto& p = j.at("planner");
      s.planner.samples_per_agent = p.value("samples_per_agent", 100);
      if (p.contains("alpha")) {
        s.planner.alpha_min = p.at("alpha").at(0).get<double>();
        s.planner.alpha_max = p.at("alpha").at(1).get<double>();
      }
      s.planner.horizon = p.value("horizon", 20);
      s.planner.include_ped_ped = p.value("include_ped_ped", false);
      s.planner.prune_threshold =
          p.value("prune_threshold", std::numeric_limits<double>::infinity());
      s.planner.obs_window = p.value("obs_window", 20);
      s.planner.goal_slack = p.value("goal_slack", 10.0);
      s.planner.trend_slack = p.value("trend_slack", 10.0);
      s.planner.indep_penalty_gain = p.value("indep_penalty_gain", 1.0);
      s.planner.indep_progress_gain = p.value("indep_progress_gain", 0.0);
      s.planner.top_k = p.value("top_k", 10);
      s.planner.seed = p.value("seed", std::uint64_t{0});
      if (p.contains("kernel")) {
        const auto& k = p.at("kernel");
        s.planner.kernel.signal_variance = k.value("signal_variance", 1.0);
        s.planner.kernel.length_scale = k.value("length_scale", 1.0);
        s.planner.kernel.noise_variance = k.value("noise_variance", 1e-4);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("scenario: malformed document: ") + e.what());
  }
  // Simulator-level fields flow into the planner copy once, here.
  s.planner = s.resolved_planner();
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_scenario: cannot open " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("load_scenario: " + path + ": " + e.what());
  }
  return scenario_from_json(j);
}

inline void save_scenario(const std::string& path, const Scenario& s) {
  std::ofstream out(path);
  if (!out) throw Error("save_scenario: cannot open " + path);
  out << scenario_to_json(s).dump(2) << "\n";
}

}  // namespace sigp
