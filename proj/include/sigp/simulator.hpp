// Deterministic 2-D crowd simulator and metrics engine: scripted, replayed
// and reactive pedestrians around a receding-horizon planner loop, with
// Table-style safety/speed/runtime metrics.
#pragma once

#include "sigp/baselines.hpp"
#include "sigp/planner.hpp"
#include "sigp/rng.hpp"
#include "sigp/types.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace sigp {

struct AgentScript {
  enum class Mode { waypoint, replay, reactive };

  std::string id;
  Mode mode = Mode::waypoint;
  std::vector<Vec2> waypoints;  // waypoint/reactive: start at [0], then visit the rest
  double speed = 1.3;           // preferred speed, m/s
  std::vector<Observation> replay;

  void validate() const {
    if (id.empty()) throw Error("AgentScript: empty id");
    if (mode == Mode::replay) {
      if (replay.empty()) throw Error("AgentScript " + id + ": empty replay trace");
      for (std::size_t i = 1; i < replay.size(); ++i)
        if (replay[i].step <= replay[i - 1].step)
          throw Error("AgentScript " + id + ": replay trace not time-monotone");
    } else {
      if (waypoints.empty()) throw Error("AgentScript " + id + ": needs at least one waypoint");
      if (!(speed > 0.0)) throw Error("AgentScript " + id + ": speed must be > 0");
    }
  }

  Vec2 start() const { return mode == Mode::replay ? replay.front().pos : waypoints.front(); }
};

struct Scenario {
  int schema_version = 1;
  std::string name = "scenario";
  std::string planner_name = "sigp";
  std::uint64_t seed = 1;
  Rect workspace;
  Vec2 robot_start = Vec2::Zero();
  Vec2 robot_goal = Vec2::Zero();
  double robot_max_speed = 1.5;
  double goal_tolerance = 0.3;
  double dt = 0.1;
  int max_steps = 300;
  double collision_radius = 0.25;
  double robot_max_accel = std::numeric_limits<double>::infinity();  // m/s²
  double obs_dropout = 0.0;
  double obs_noise = 0.0;
  int max_degraded = 5;
  double reactive_gain = 1.2;
  double reactive_range = 1.0;
  std::vector<AgentScript> agents;
  PlannerConfig planner;

  void validate() const {
    workspace.validate();
    if (!workspace.contains(robot_start)) throw Error("Scenario: robot start outside workspace");
    if (!workspace.contains(robot_goal)) throw Error("Scenario: robot goal outside workspace");
    if (!(dt > 0.0)) throw Error("Scenario: dt must be > 0");
    if (max_steps < 1) throw Error("Scenario: max_steps must be >= 1");
    if (!(collision_radius > 0.0)) throw Error("Scenario: collision_radius must be > 0");
    if (!(robot_max_speed > 0.0)) throw Error("Scenario: robot_max_speed must be > 0");
    if (!(robot_max_accel > 0.0)) throw Error("Scenario: robot_max_accel must be > 0");
    if (obs_dropout < 0.0 || obs_dropout >= 1.0) throw Error("Scenario: obs_dropout in [0, 1)");
    if (obs_noise < 0.0) throw Error("Scenario: obs_noise must be >= 0");
    if (max_degraded < 1) throw Error("Scenario: max_degraded must be >= 1");
    for (const auto& a : agents) a.validate();
    planner.validate();
  }

  /// Planner settings that mirror simulator-level fields.
  PlannerConfig resolved_planner() const {
    PlannerConfig cfg = planner;
    cfg.dt = dt;
    cfg.max_speed = robot_max_speed;
    cfg.collision_radius = collision_radius;
    return cfg;
  }
};

struct Metrics {
  double safety = std::numeric_limits<double>::infinity();  // min robot-pedestrian distance, m
  double speed = 0.0;                                       // average robot speed, m/s
  double runtime = 0.0;                                     // mean planning seconds per cycle
  int samples = 0;
  int collisions = 0;  // steps with a pedestrian inside collision_radius
  bool reached_goal = false;
};

struct LogRow {
  int step = 0;
  std::string agent;
  Vec2 pos = Vec2::Zero();
};

struct EpisodeResult {
  Metrics metrics;
  std::vector<LogRow> log;
  std::string failure;  // empty on clean episodes
  std::vector<double> min_distance_per_step;
  // (cycle, rank, log coefficient) triples for the plot export
  std::vector<std::array<double, 3>> coefficient_rows;
};

namespace detail {

struct AgentState {
  const AgentScript* script = nullptr;
  Vec2 pos = Vec2::Zero();
  std::size_t next_waypoint = 1;
  std::size_t replay_cursor = 1;
};

}  // namespace detail

struct SimState {
  int t = 0;
  Vec2 robot_pos = Vec2::Zero();
  Vec2 robot_vel = Vec2::Zero();
  bool last_action_clamped = false;
  std::vector<detail::AgentState> agents;
  TrajectoryObservations robot_obs;
  std::vector<TrajectoryObservations> agent_obs;
  std::vector<LogRow> log;
  Rng dropout_rng{0};
  Rng noise_rng{0};
};

inline SimState init_state(const Scenario& scenario) {
  scenario.validate();
  SimState state;
  state.robot_pos = scenario.robot_start;
  state.dropout_rng = Rng(derive_seed(scenario.seed, kStreamDropout));
  state.noise_rng = Rng(derive_seed(scenario.seed, kStreamNoise));
  state.robot_obs.agent_id = "robot";
  for (const auto& script : scenario.agents) {
    detail::AgentState a;
    a.script = &script;
    a.pos = script.start();
    state.agents.push_back(a);
    TrajectoryObservations obs;
    obs.agent_id = script.id;
    state.agent_obs.push_back(std::move(obs));
  }

  auto observe = [&](TrajectoryObservations& obs, const Vec2& truth, bool can_drop) {
    if (can_drop && state.dropout_rng.uniform() < scenario.obs_dropout) return;
    Vec2 measured = truth;
    if (scenario.obs_noise > 0.0) {
      measured.x() += scenario.obs_noise * state.noise_rng.normal();
      measured.y() += scenario.obs_noise * state.noise_rng.normal();
    }
    obs.append(state.t, measured);
  };
  state.log.push_back({0, "robot", state.robot_pos});
  observe(state.robot_obs, state.robot_pos, false);
  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    state.log.push_back({0, state.agents[i].script->id, state.agents[i].pos});
    observe(state.agent_obs[i], state.agents[i].pos, true);
  }
  return state;
}

/// Advance the world one step under the commanded robot position. Scripted
/// agents follow their scripts; reactive agents add a repulsion away from
/// the robot's pre-step position. Actions beyond the per-step speed or
/// acceleration limits are clamped and flagged.
inline void sim_step(SimState& state, const Scenario& scenario, const Vec2& action) {
  const Vec2 robot_before = state.robot_pos;
  state.last_action_clamped = false;

  Vec2 vel = (action - robot_before) / scenario.dt;
  const double speed = vel.norm();
  if (speed > scenario.robot_max_speed + 1e-12) {
    vel *= scenario.robot_max_speed / speed;
    state.last_action_clamped = true;
  }
  if (std::isfinite(scenario.robot_max_accel)) {
    const Vec2 dv = vel - state.robot_vel;
    const double dv_limit = scenario.robot_max_accel * scenario.dt;
    const double dv_norm = dv.norm();
    if (dv_norm > dv_limit + 1e-12) {
      vel = state.robot_vel + dv * (dv_limit / dv_norm);
      state.last_action_clamped = true;
    }
  }
  const double final_speed = vel.norm();
  if (final_speed > scenario.robot_max_speed + 1e-12)
    vel *= scenario.robot_max_speed / final_speed;
  state.robot_pos = scenario.workspace.clamp(robot_before + vel * scenario.dt);
  state.robot_vel = (state.robot_pos - robot_before) / scenario.dt;

  for (auto& agent : state.agents) {
    const AgentScript& script = *agent.script;
    switch (script.mode) {
      case AgentScript::Mode::waypoint: {
        double budget = script.speed * scenario.dt;
        while (budget > 1e-12 && agent.next_waypoint < script.waypoints.size()) {
          const Vec2 to = script.waypoints[agent.next_waypoint] - agent.pos;
          const double dist = to.norm();
          if (dist <= budget) {
            agent.pos = script.waypoints[agent.next_waypoint];
            budget -= dist;
            ++agent.next_waypoint;
          } else {
            agent.pos += to * (budget / dist);
            budget = 0.0;
          }
        }
        break;
      }
      case AgentScript::Mode::replay: {
        while (agent.replay_cursor < script.replay.size() &&
               script.replay[agent.replay_cursor].step <= state.t + 1) {
          agent.pos = script.replay[agent.replay_cursor].pos;
          ++agent.replay_cursor;
        }
        break;
      }
      case AgentScript::Mode::reactive: {
        Vec2 v_des = Vec2::Zero();
        if (agent.next_waypoint < script.waypoints.size()) {
          const Vec2 to = script.waypoints[agent.next_waypoint] - agent.pos;
          const double dist = to.norm();
          if (dist < 0.15)
            ++agent.next_waypoint;
          else
            v_des = to * (script.speed / dist);
        }
        const Vec2 away = agent.pos - robot_before;
        const double dist = away.norm();
        Vec2 repulsion = Vec2::Zero();
        if (dist > 1e-9)
          repulsion = away * (scenario.reactive_gain * std::exp(-dist / scenario.reactive_range) / dist);
        Vec2 v = v_des + repulsion;
        const double vmax = 1.5 * script.speed;
        const double vn = v.norm();
        if (vn > vmax) v *= vmax / vn;
        agent.pos = scenario.workspace.clamp(agent.pos + v * scenario.dt);
        break;
      }
    }
  }

  state.t += 1;
  auto observe = [&](TrajectoryObservations& obs, const Vec2& truth, bool can_drop) {
    if (can_drop && state.dropout_rng.uniform() < scenario.obs_dropout) return;
    Vec2 measured = truth;
    if (scenario.obs_noise > 0.0) {
      measured.x() += scenario.obs_noise * state.noise_rng.normal();
      measured.y() += scenario.obs_noise * state.noise_rng.normal();
    }
    obs.append(state.t, measured);
  };
  state.log.push_back({state.t, "robot", state.robot_pos});
  observe(state.robot_obs, state.robot_pos, false);  // the robot always sees itself
  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    state.log.push_back({state.t, state.agents[i].script->id, state.agents[i].pos});
    observe(state.agent_obs[i], state.agents[i].pos, true);
  }
}

/// Minimum robot-pedestrian distance per step, recomputed from a trajectory
/// log. Steps with no pedestrians yield +inf.
inline std::vector<double> min_distances_from_log(const std::vector<LogRow>& log) {
  std::map<int, Vec2> robot;
  std::map<int, std::vector<Vec2>> others;
  int max_step = 0;
  for (const auto& row : log) {
    max_step = std::max(max_step, row.step);
    if (row.agent == "robot")
      robot[row.step] = row.pos;
    else
      others[row.step].push_back(row.pos);
  }
  std::vector<double> out;
  for (int s = 0; s <= max_step; ++s) {
    const auto rit = robot.find(s);
    if (rit == robot.end()) continue;
    double best = std::numeric_limits<double>::infinity();
    const auto oit = others.find(s);
    if (oit != others.end())
      for (const Vec2& p : oit->second) best = std::min(best, (p - rit->second).norm());
    out.push_back(best);
  }
  return out;
}

/// Run a full receding-horizon episode. Deterministic in the scenario seed:
/// the per-cycle planner seed is derived from it, and so are the dropout and
/// noise streams.
inline EpisodeResult run_episode(const Scenario& scenario, const PlanFn& planner) {
  EpisodeResult result;
  SimState state = init_state(scenario);
  PlannerConfig cfg = scenario.resolved_planner();

  std::vector<double> plan_seconds;
  int degraded_streak = 0;
  bool reached = false;

  while (state.t < scenario.max_steps) {
    if ((state.robot_pos - scenario.robot_goal).norm() <= scenario.goal_tolerance) {
      reached = true;
      break;
    }
    PlanInput input;
    input.t_now = state.t;
    input.robot = state.robot_obs;
    input.goal = scenario.robot_goal;
    input.workspace = scenario.workspace;
    for (const auto& obs : state.agent_obs)
      if (!obs.empty()) input.humans.push_back(obs);

    cfg.seed = derive_seed(scenario.seed, kStreamCycle, static_cast<std::uint64_t>(state.t));
    const auto t0 = std::chrono::steady_clock::now();
    const PlanResult plan = planner(input, cfg);
    const auto t1 = std::chrono::steady_clock::now();
    plan_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());

    const std::size_t cycle = plan_seconds.size() - 1;
    for (std::size_t r = 0; r < plan.top.size(); ++r)
      result.coefficient_rows.push_back(
          {static_cast<double>(cycle), static_cast<double>(r), plan.top[r].log_coeff});

    if (plan.degraded) {
      if (++degraded_streak >= scenario.max_degraded) {
        result.failure = "planner degraded for " + std::to_string(degraded_streak) +
                         " consecutive cycles";
        break;
      }
    } else {
      degraded_streak = 0;
    }
    sim_step(state, scenario, plan.action);
  }
  if (!reached && result.failure.empty() &&
      (state.robot_pos - scenario.robot_goal).norm() <= scenario.goal_tolerance)
    reached = true;  // arrived exactly at the step limit
  if (!reached && result.failure.empty()) result.failure = "goal not reached within max_steps";

  result.log = std::move(state.log);
  result.min_distance_per_step = min_distances_from_log(result.log);

  Metrics& m = result.metrics;
  m.reached_goal = reached;
  m.samples = cfg.samples_per_agent;
  for (double d : result.min_distance_per_step) {
    m.safety = std::min(m.safety, d);
    if (d < scenario.collision_radius) ++m.collisions;
  }
  if (!plan_seconds.empty()) {
    double acc = 0.0;
    for (double s : plan_seconds) acc += s;
    m.runtime = acc / static_cast<double>(plan_seconds.size());
  }
  double path = 0.0;
  Vec2 prev = scenario.robot_start;
  for (const auto& row : result.log) {
    if (row.agent != "robot" || row.step == 0) continue;
    path += (row.pos - prev).norm();
    prev = row.pos;
  }
  if (state.t > 0) m.speed = path / (state.t * scenario.dt);
  return result;
}

inline EpisodeResult run_episode(const Scenario& scenario) {
  const auto& registry = planner_registry();
  const auto it = registry.find(scenario.planner_name);
  if (it == registry.end()) throw Error("run_episode: unknown planner " + scenario.planner_name);
  return run_episode(scenario, it->second);
}

// --- plain-text artifacts -------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// One row per (step, agent, x, y).
inline std::string trajectory_log_text(const std::vector<LogRow>& log) {
  std::string out;
  for (const auto& row : log)
    out += std::to_string(row.step) + " " + row.agent + " " + format_double(row.pos.x()) + " " +
           format_double(row.pos.y()) + "\n";
  return out;
}

inline const char* metrics_csv_header() {
  return "run_id,safety_m,speed_mps,runtime_s,samples,collisions,reached_goal\n";
}

inline std::string metrics_csv_row(const std::string& run_id, const Metrics& m) {
  return run_id + "," + format_double(m.safety) + "," + format_double(m.speed) + "," +
         format_double(m.runtime) + "," + std::to_string(m.samples) + "," +
         std::to_string(m.collisions) + "," + (m.reached_goal ? "1" : "0") + "\n";
}

// --- dataset files ---------------------------------------------------------

/// Whitespace-separated rows: frame_id agent_id x y. Agents keep their order
/// of first appearance; frames must be strictly increasing per agent.
inline std::vector<TrajectoryObservations> load_dataset(std::istream& in) {
  std::vector<TrajectoryObservations> sets;
  std::map<std::string, std::size_t> index;
  std::string line;
  int line_no = 0;
  std::vector<std::string> bad;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    long frame;
    std::string id;
    double x, y;
    if (!(row >> frame >> id >> x >> y)) {
      bad.push_back(std::to_string(line_no));
      continue;
    }
    auto [it, inserted] = index.try_emplace(id, sets.size());
    if (inserted) {
      TrajectoryObservations obs;
      obs.agent_id = id;
      sets.push_back(std::move(obs));
    }
    TrajectoryObservations& obs = sets[it->second];
    if (!obs.samples.empty() && frame <= obs.samples.back().step)
      throw Error("load_dataset: non-monotone frame for agent " + id + " at line " +
                  std::to_string(line_no));
    obs.append(static_cast<int>(frame), {x, y});
  }
  if (!bad.empty()) {
    std::string msg = "load_dataset: malformed rows at line(s) ";
    for (std::size_t i = 0; i < bad.size() && i < 10; ++i) msg += (i ? ", " : "") + bad[i];
    throw Error(msg);
  }
  return sets;
}

inline std::vector<TrajectoryObservations> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_dataset: cannot open " + path);
  return load_dataset(in);
}

inline void save_dataset(std::ostream& out, const std::vector<TrajectoryObservations>& sets) {
  // Interleave by frame so saved files look like captured data.
  std::vector<std::size_t> cursor(sets.size(), 0);
  while (true) {
    long best_frame = std::numeric_limits<long>::max();
    std::size_t best = sets.size();
    for (std::size_t i = 0; i < sets.size(); ++i)
      if (cursor[i] < sets[i].samples.size() && sets[i].samples[cursor[i]].step < best_frame) {
        best_frame = sets[i].samples[cursor[i]].step;
        best = i;
      }
    if (best == sets.size()) break;
    const Observation& o = sets[best].samples[cursor[best]++];
    out << o.step << " " << sets[best].agent_id << " " << format_double(o.pos.x()) << " "
        << format_double(o.pos.y()) << "\n";
  }
}

inline void save_dataset(const std::string& path, const std::vector<TrajectoryObservations>& sets) {
  std::ofstream out(path);
  if (!out) throw Error("save_dataset: cannot open " + path);
  save_dataset(out, sets);
}

}  // namespace sigp
