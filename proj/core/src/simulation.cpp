#include "sharednav/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "csv.hpp"
#include "sharednav/error.hpp"
#include "sharednav/random.hpp"

namespace sharednav {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  if (value.empty()) return {};
  std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

Point2 point_of(const YAML::Node& n) {
  if (!n.IsSequence() || n.size() != 2) throw FormatError("expected a point [x, y]");
  return {n[0].as<double>(), n[1].as<double>()};
}

void read_schedule(const YAML::Node& n, GainSchedule& g) {
  if (!n) return;
  if (n["a0"]) g.a0 = n["a0"].as<double>();
  if (n["a1"]) g.a1 = n["a1"].as<double>();
  if (n["b0"]) g.b0 = n["b0"].as<double>();
  if (n["b1"]) g.b1 = n["b1"].as<double>();
}

template <class T>
void read(const YAML::Node& n, const char* key, T& out) {
  if (n && n[key]) out = n[key].as<T>();
}

}  // namespace

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  ExperimentConfig cfg;
  const auto base = path.parent_path();
  try {
    const YAML::Node root = YAML::LoadFile(path.string());
    read(root, "name", cfg.name);
    if (root["map"]) cfg.map = resolve(base, root["map"].as<std::string>());
    if (root["roadmap"]) cfg.roadmap = resolve(base, root["roadmap"].as<std::string>());
    if (root["behaviour_map"]) cfg.behaviour_map = resolve(base, root["behaviour_map"].as<std::string>());
    if (root["autoencoder"]) cfg.autoencoder = resolve(base, root["autoencoder"].as<std::string>());
    if (root["head"]) cfg.head = resolve(base, root["head"].as<std::string>());
    if (root["output_dir"]) cfg.output_dir = resolve(base, root["output_dir"].as<std::string>());
    if (const auto m = root["mission"]) {
      if (m["p0"]) cfg.p0 = point_of(m["p0"]);
      if (m["pf"]) cfg.pf = point_of(m["pf"]);
    }
    read(root, "duration", cfg.duration);
    read(root, "dt", cfg.dt);
    read(root, "goal_radius", cfg.goal_radius);
    read(root, "localisation_noise", cfg.localisation_noise);
    read(root, "seed", cfg.seed);
    if (const auto p = root["policy"]) {
      auto& pp = cfg.policy;
      if (p["kind"]) pp.kind = parse_policy(p["kind"].as<std::string>());
      read(p, "speed", pp.speed);
      read(p, "lookahead", pp.lookahead);
      if (p["heading_noise_deg"]) pp.heading_noise = deg2rad(p["heading_noise_deg"].as<double>());
      read(p, "noise_interval", pp.noise_interval);
      if (p["rough_amplitude_deg"]) pp.rough_amplitude = deg2rad(p["rough_amplitude_deg"].as<double>());
      read(p, "rough_period", pp.rough_period);
      if (p["hold_class"]) pp.hold_class = parse_behaviour(p["hold_class"].as<std::string>());
      read(p, "hold_lead", pp.hold_lead);
      read(p, "hold_distance", pp.hold_distance);
      read(p, "hold_gain", pp.hold_gain);
      read(p, "stiffness", pp.stiffness);
      read(p, "arm_damping", pp.arm_damping);
      if (p["replay_file"]) pp.replay_file = resolve(base, p["replay_file"].as<std::string>()).string();
    }
    if (const auto c = root["control"]) {
      auto& cc = cfg.control;
      if (const auto v = c["vehicle"]) {
        read(v, "wheelbase", cc.vehicle.wheelbase);
        read(v, "track", cc.vehicle.track);
        if (v["alpha_max_deg"]) cc.vehicle.alpha_max = deg2rad(v["alpha_max_deg"].as<double>());
        read(v, "v_max", cc.vehicle.v_max);
        read(v, "inertia", cc.vehicle.inertia);
        read(v, "damping", cc.vehicle.damping);
        read(v, "alignment", cc.vehicle.alignment);
      }
      read_schedule(c["alpha_gains"], cc.alpha);
      read_schedule(c["beta_gains"], cc.beta);
      read(c, "derivative_lag", cc.derivative_lag);
      if (const auto d = c["disengage"]) {
        read(d, "enabled", cc.disengage.enabled);
        read(d, "threshold", cc.disengage.threshold);
        read(d, "duration", cc.disengage.duration);
        read(d, "leak", cc.disengage.leak);
      }
      if (const auto z = c["danger_zones"])
        for (const auto& zone : z) cc.danger_zones.push_back({point_of(zone["min"]), point_of(zone["max"])});
    }
  } catch (const YAML::Exception& e) {
    throw FormatError("bad experiment config " + path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError("bad experiment config " + path.string() + ": " + e.what());
  }
  if (!(cfg.dt > 0.0) || !(cfg.duration > 0.0) || !(cfg.goal_radius > 0.0))
    throw FormatError("experiment config " + path.string() + ": dt, duration and goal_radius must be positive");
  return cfg;
}

void save_experiment_config(const std::filesystem::path& path, const ExperimentConfig& cfg) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  auto pt = [&](Point2 p) {
    e << YAML::Flow << YAML::BeginSeq << p.x << p.y << YAML::EndSeq;
  };
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << cfg.name;
  e << YAML::Key << "map" << YAML::Value << cfg.map.string();
  e << YAML::Key << "roadmap" << YAML::Value << cfg.roadmap.string();
  e << YAML::Key << "behaviour_map" << YAML::Value << cfg.behaviour_map.string();
  e << YAML::Key << "autoencoder" << YAML::Value << cfg.autoencoder.string();
  e << YAML::Key << "head" << YAML::Value << cfg.head.string();
  e << YAML::Key << "output_dir" << YAML::Value << cfg.output_dir.string();
  e << YAML::Key << "mission" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "p0" << YAML::Value;
  pt(cfg.p0);
  e << YAML::Key << "pf" << YAML::Value;
  pt(cfg.pf);
  e << YAML::EndMap;
  e << YAML::Key << "duration" << YAML::Value << cfg.duration;
  e << YAML::Key << "dt" << YAML::Value << cfg.dt;
  e << YAML::Key << "goal_radius" << YAML::Value << cfg.goal_radius;
  e << YAML::Key << "localisation_noise" << YAML::Value << cfg.localisation_noise;
  e << YAML::Key << "seed" << YAML::Value << cfg.seed;
  const auto& p = cfg.policy;
  e << YAML::Key << "policy" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << policy_name(p.kind);
  e << YAML::Key << "speed" << YAML::Value << p.speed;
  e << YAML::Key << "lookahead" << YAML::Value << p.lookahead;
  e << YAML::Key << "heading_noise_deg" << YAML::Value << rad2deg(p.heading_noise);
  e << YAML::Key << "noise_interval" << YAML::Value << p.noise_interval;
  e << YAML::Key << "rough_amplitude_deg" << YAML::Value << rad2deg(p.rough_amplitude);
  e << YAML::Key << "rough_period" << YAML::Value << p.rough_period;
  e << YAML::Key << "hold_class" << YAML::Value << behaviour_name(p.hold_class);
  e << YAML::Key << "hold_lead" << YAML::Value << p.hold_lead;
  e << YAML::Key << "hold_distance" << YAML::Value << p.hold_distance;
  e << YAML::Key << "hold_gain" << YAML::Value << p.hold_gain;
  e << YAML::Key << "stiffness" << YAML::Value << p.stiffness;
  e << YAML::Key << "arm_damping" << YAML::Value << p.arm_damping;
  if (!p.replay_file.empty()) e << YAML::Key << "replay_file" << YAML::Value << p.replay_file;
  e << YAML::EndMap;
  const auto& c = cfg.control;
  auto schedule = [&](const char* key, const GainSchedule& g) {
    e << YAML::Key << key << YAML::Value << YAML::BeginMap << YAML::Key << "a0" << YAML::Value << g.a0
      << YAML::Key << "a1" << YAML::Value << g.a1 << YAML::Key << "b0" << YAML::Value << g.b0 << YAML::Key
      << "b1" << YAML::Value << g.b1 << YAML::EndMap;
  };
  e << YAML::Key << "control" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "vehicle" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "wheelbase" << YAML::Value << c.vehicle.wheelbase;
  e << YAML::Key << "track" << YAML::Value << c.vehicle.track;
  e << YAML::Key << "alpha_max_deg" << YAML::Value << rad2deg(c.vehicle.alpha_max);
  e << YAML::Key << "v_max" << YAML::Value << c.vehicle.v_max;
  e << YAML::Key << "inertia" << YAML::Value << c.vehicle.inertia;
  e << YAML::Key << "damping" << YAML::Value << c.vehicle.damping;
  e << YAML::Key << "alignment" << YAML::Value << c.vehicle.alignment;
  e << YAML::EndMap;
  schedule("alpha_gains", c.alpha);
  schedule("beta_gains", c.beta);
  e << YAML::Key << "derivative_lag" << YAML::Value << c.derivative_lag;
  e << YAML::Key << "disengage" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "enabled" << YAML::Value << c.disengage.enabled;
  e << YAML::Key << "threshold" << YAML::Value << c.disengage.threshold;
  e << YAML::Key << "duration" << YAML::Value << c.disengage.duration;
  e << YAML::Key << "leak" << YAML::Value << c.disengage.leak;
  e << YAML::EndMap;
  e << YAML::Key << "danger_zones" << YAML::Value << YAML::BeginSeq;
  for (const auto& z : c.danger_zones) {
    e << YAML::BeginMap << YAML::Key << "min" << YAML::Value;
    pt(z.min);
    e << YAML::Key << "max" << YAML::Value;
    pt(z.max);
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;
  e << YAML::EndMap;
  e << YAML::EndMap;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << e.c_str() << '\n';
}

Artifacts load_artifacts(const ExperimentConfig& cfg) {
  for (const auto* p : {&cfg.map, &cfg.roadmap, &cfg.behaviour_map, &cfg.autoencoder, &cfg.head})
    if (p->empty() || !std::filesystem::exists(*p))
      throw FormatError("missing artefact: " + (p->empty() ? std::string("(not configured)") : p->string()));
  Artifacts a;
  a.grid = load_map(cfg.map);
  a.roadmap = load_roadmap(cfg.roadmap);
  a.encoder = load_autoencoder(cfg.autoencoder).first;
  a.head = load_head(cfg.head);
  a.behaviour_map = load_behavioural_map(cfg.behaviour_map, a.encoder, a.head);
  return a;
}

const std::vector<std::string>& telemetry_columns() {
  static const std::vector<std::string> cols{
      "step",        "t",           "x",           "y",           "theta",        "v",
      "omega",       "alpha_r",     "alpha_l",     "alpha_dot_r", "alpha_dot_l",  "s_ref",
      "cross_track", "cell_ix",     "cell_iy",     "ref_class",   "theta_ref",    "alpha_ref_r",
      "alpha_ref_l", "heading_error", "confidence_valid", "eps_left", "eps_right", "eps_straight",
      "eps_hat",     "lambda",      "a",           "b",           "tau_alpha_r",  "tau_alpha_l",
      "tau_beta_r",  "tau_beta_l",  "tau_r",       "tau_l",       "engaged",      "disengaged",
      "opposition",  "human_v",     "human_tau_r", "human_tau_l", "human_phase",  "human_override",
      "command_clamped"};
  return cols;
}

namespace {

// Field accessors in column order; one table drives both writing and reading.
template <class R, class Fn>
void for_each_field(R& r, Fn&& fn) {
  fn(r.step);
  fn(r.t);
  fn(r.x);
  fn(r.y);
  fn(r.theta);
  fn(r.v);
  fn(r.omega);
  fn(r.alpha_r);
  fn(r.alpha_l);
  fn(r.alpha_dot_r);
  fn(r.alpha_dot_l);
  fn(r.s_ref);
  fn(r.cross_track);
  fn(r.cell_ix);
  fn(r.cell_iy);
  fn(r.ref_class);
  fn(r.theta_ref);
  fn(r.alpha_ref_r);
  fn(r.alpha_ref_l);
  fn(r.heading_error);
  fn(r.confidence_valid);
  fn(r.eps_left);
  fn(r.eps_right);
  fn(r.eps_straight);
  fn(r.eps_hat);
  fn(r.lambda);
  fn(r.a);
  fn(r.b);
  fn(r.tau_alpha_r);
  fn(r.tau_alpha_l);
  fn(r.tau_beta_r);
  fn(r.tau_beta_l);
  fn(r.tau_r);
  fn(r.tau_l);
  fn(r.engaged);
  fn(r.disengaged);
  fn(r.opposition);
  fn(r.human_v);
  fn(r.human_tau_r);
  fn(r.human_tau_l);
  fn(r.human_phase);
  fn(r.human_override);
  fn(r.command_clamped);
}

}  // namespace

void write_telemetry_csv(const std::filesystem::path& path, const std::vector<TelemetryRecord>& records) {
  CsvWriter w(path, telemetry_columns());
  for (const auto& r : records) {
    for_each_field(r, [&](const auto& v) { w.field(v); });
    w.end_row();
  }
  w.close();
}

std::vector<TelemetryRecord> read_telemetry_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  if (table.header != telemetry_columns()) throw FormatError("unexpected telemetry columns in " + path.string());
  std::vector<TelemetryRecord> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    TelemetryRecord r;
    std::size_t c = 0;
    for_each_field(r, [&](auto& v) { parse_csv_field(row.at(c++), v, path, i + 2); });
    out.push_back(r);
  }
  return out;
}

void for_each_telemetry_field(const TelemetryRecord& r,
                              const std::function<void(const std::string& name, double value, bool integral)>& fn) {
  const auto& cols = telemetry_columns();
  std::size_t c = 0;
  for_each_field(r, [&](const auto& v) {
    using T = std::decay_t<decltype(v)>;
    fn(cols[c++], static_cast<double>(v), std::is_integral_v<T>);
  });
}

RunReport summarize(const std::vector<TelemetryRecord>& records, Point2 goal, double goal_radius) {
  RunReport rep;
  rep.steps = records.size();
  if (records.empty()) return rep;
  const double dt = records.size() > 1 ? records[1].t - records[0].t : 0.0;
  rep.duration = records.back().t + dt;
  const auto& last = records.back();
  rep.final_goal_distance = std::hypot(last.x - goal.x, last.y - goal.y);
  rep.goal_reached = rep.final_goal_distance <= goal_radius;

  double tau_sum = 0.0, eps_sum = 0.0, ct_sum = 0.0, he_sum = 0.0;
  std::size_t eps_n = 0;
  int prev_dis = 0;
  for (const auto& r : records) {
    const double tau = 0.5 * (std::abs(r.tau_r) + std::abs(r.tau_l));
    tau_sum += tau;
    rep.max_abs_torque = std::max({rep.max_abs_torque, std::abs(r.tau_r), std::abs(r.tau_l)});
    if (r.confidence_valid) {
      eps_sum += r.eps_hat;
      ++eps_n;
    }
    ct_sum += std::abs(r.cross_track);
    rep.max_abs_cross_track = std::max(rep.max_abs_cross_track, std::abs(r.cross_track));
    he_sum += std::abs(r.heading_error);
    if (r.disengaged && !prev_dis) ++rep.disengagements;
    prev_dis = r.disengaged;
  }
  const auto n = static_cast<double>(records.size());
  rep.mean_abs_torque = tau_sum / n;
  rep.mean_eps_hat = eps_n ? eps_sum / static_cast<double>(eps_n) : 0.0;
  rep.mean_abs_cross_track = ct_sum / n;
  rep.mean_abs_heading_error = he_sum / n;

  auto& ep = rep.episode;
  const auto hold = std::find_if(records.begin(), records.end(), [](const auto& r) { return r.human_phase == 1; });
  if (hold != records.end()) {
    ep.present = true;
    ep.hold_start = hold->t;
    const auto rel = std::find_if(hold, records.end(), [](const auto& r) { return r.human_phase == 2; });
    ep.release = rel != records.end() ? rel->t : records.back().t + dt;
    const int left = static_cast<int>(Behaviour::Left);
    for (auto it = hold; it != rel; ++it) {
      if (it->confidence_valid && it->ref_class == left && it->eps_left < ep.left_min_during_hold) {
        ep.left_min_during_hold = it->eps_left;
        ep.left_min_time = it->t;
      }
    }
    for (auto it = rel; it != records.end(); ++it) {
      if (it->confidence_valid && it->eps_left > ep.left_max_after_release) {
        ep.left_max_after_release = it->eps_left;
        ep.left_recovery_time = it->t;
      }
      if (!ep.heading_settle && std::abs(it->heading_error) < 0.1) ep.heading_settle = it->t - ep.release;
    }
  }
  return rep;
}

std::string report_to_json(const RunReport& r) {
  nlohmann::json j;
  j["format"] = "sharednav-report";
  j["version"] = 1;
  j["name"] = r.name;
  j["policy"] = r.policy;
  j["telemetry"] = r.telemetry;
  j["steps"] = r.steps;
  j["duration"] = r.duration;
  j["goal_reached"] = r.goal_reached;
  j["final_goal_distance"] = r.final_goal_distance;
  j["mean_abs_torque"] = r.mean_abs_torque;
  j["max_abs_torque"] = r.max_abs_torque;
  j["mean_eps_hat"] = r.mean_eps_hat;
  j["mean_abs_cross_track"] = r.mean_abs_cross_track;
  j["max_abs_cross_track"] = r.max_abs_cross_track;
  j["mean_abs_heading_error"] = r.mean_abs_heading_error;
  j["disengagements"] = r.disengagements;
  const auto& e = r.episode;
  if (e.present) {
    j["episode"] = {{"hold_start", e.hold_start},
                    {"release", e.release},
                    {"left_min_during_hold", e.left_min_during_hold},
                    {"left_min_time", e.left_min_time},
                    {"left_max_after_release", e.left_max_after_release},
                    {"left_recovery_time", e.left_recovery_time},
                    {"heading_settle", e.heading_settle ? nlohmann::json(*e.heading_settle) : nlohmann::json()}};
  } else {
    j["episode"] = nullptr;
  }
  return j.dump(2);
}

void write_report_json(const std::filesystem::path& path, const RunReport& report) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << report_to_json(report) << '\n';
}

Simulation::Simulation(const Artifacts& artifacts, const ExperimentConfig& cfg, std::unique_ptr<HumanPolicy> policy)
    : Simulation(artifacts, cfg, std::move(policy),
                 plan_mission(artifacts.grid, artifacts.roadmap, artifacts.behaviour_map, cfg.p0, cfg.pf)) {}

Simulation::Simulation(const Artifacts& artifacts, const ExperimentConfig& cfg, std::unique_ptr<HumanPolicy> policy,
                       Mission mission)
    : artifacts_(&artifacts),
      cfg_(cfg),
      policy_(std::move(policy)),
      mission_(std::move(mission)),
      rng_(derive_seed(cfg.seed, 21)),
      reconstructor_(mission_.window.spacing, {}),
      history_(static_cast<std::size_t>(mission_.window.length)) {
  if (!policy_) throw InvalidArgument("Simulation: no policy");
  if (!(cfg_.dt > 0.0) || !(cfg_.duration > 0.0)) throw InvalidArgument("Simulation: bad timing");
  init();
}

void Simulation::init() {
  const CurvePoint start = mission_.path.eval(0.0);
  state_.pose = start.pose;
  state_.v = 0.0;
  controller_.emplace(mission_, artifacts_->encoder, artifacts_->head, cfg_.control);
  human_tracker_ = PathTracker(&mission_.samples);
  reconstructor_ = PathReconstructor(mission_.window.spacing, state_.pose);
  max_steps_ = static_cast<std::size_t>(std::llround(cfg_.duration / cfg_.dt));
}

const TelemetryRecord& Simulation::step() {
  if (finished_) throw Error("Simulation: already finished");
  const double dt = cfg_.dt;
  const double t = static_cast<double>(k_) * dt;

  PolicyContext ctx;
  ctx.t = t;
  ctx.dt = dt;
  ctx.step = k_;
  ctx.state = &state_;
  ctx.mission = &mission_;
  ctx.abscissa = human_tracker_.update(state_.pose.point());
  ctx.cell = mission_.cell_at(ctx.abscissa);
  ctx.vehicle = &cfg_.control.vehicle;
  ctx.rng = &rng_;
  const HumanAction action = policy_->act(ctx);

  const ControlOutput out = controller_->step(state_, history_, new_sample_, action.input, dt, action.override_release);

  TelemetryRecord r;
  r.step = k_;
  r.t = t;
  r.x = state_.pose.x;
  r.y = state_.pose.y;
  r.theta = state_.pose.theta;
  r.v = state_.v;
  r.omega = state_.omega;
  r.alpha_r = state_.alpha_r;
  r.alpha_l = state_.alpha_l;
  r.alpha_dot_r = state_.alpha_dot_r;
  r.alpha_dot_l = state_.alpha_dot_l;
  r.s_ref = out.abscissa;
  r.cross_track = out.cross_track;
  const auto& mc = mission_.cells[out.cell];
  r.cell_ix = mc.cell.ix;
  r.cell_iy = mc.cell.iy;
  r.ref_class = static_cast<int>(mc.reference);
  r.theta_ref = out.refs.theta;
  r.alpha_ref_r = out.refs.alpha_r;
  r.alpha_ref_l = out.refs.alpha_l;
  r.heading_error = wrap_angle(out.refs.theta - state_.pose.theta);
  if (out.confidence) {
    r.confidence_valid = 1;
    r.eps_left = out.confidence->p[Behaviour::Left];
    r.eps_right = out.confidence->p[Behaviour::Right];
    r.eps_straight = out.confidence->p[Behaviour::Straight];
    r.eps_hat = out.confidence->value;
  }
  r.lambda = out.alpha_gains.lambda;
  r.a = out.alpha_gains.a;
  r.b = out.alpha_gains.b;
  r.tau_alpha_r = out.command.tau_alpha_r;
  r.tau_alpha_l = out.command.tau_alpha_l;
  r.tau_beta_r = out.command.tau_beta_r;
  r.tau_beta_l = out.command.tau_beta_l;
  r.tau_r = out.command.tau_r;
  r.tau_l = out.command.tau_l;
  r.engaged = out.command.engaged ? 1 : 0;
  r.disengaged = out.disengage.active ? 1 : 0;
  r.opposition = out.disengage.opposition_integral;
  r.human_v = action.input.v;
  r.human_tau_r = action.input.tau_r;
  r.human_tau_l = action.input.tau_l;
  r.human_phase = action.phase;
  r.human_override = action.override_release ? 1 : 0;
  r.command_clamped = action.command_clamped ? 1 : 0;
  records_.push_back(r);

  state_ = step_plant(state_, action.input, out.command, dt, cfg_.control.vehicle);

  std::vector<PathSample> emitted;
  if (cfg_.localisation_noise > 0.0) {
    Pose2 measured = state_.pose;
    measured.x += cfg_.localisation_noise * standard_normal(rng_);
    measured.y += cfg_.localisation_noise * standard_normal(rng_);
    emitted = reconstructor_.push_pose(measured);
  } else {
    emitted = reconstructor_.push_odometry(state_.v, state_.omega, dt);
  }
  for (const auto& s : emitted) history_.push(s);
  new_sample_ = !emitted.empty();

  ++k_;
  // Judged on the recorded pose so the report can be recomputed from the telemetry.
  if (distance({r.x, r.y}, cfg_.pf) <= cfg_.goal_radius) {
    goal_reached_ = true;
    finished_ = true;
  } else if (k_ >= max_steps_) {
    finished_ = true;
  }
  return records_.back();
}

RunReport run_simulation(const Artifacts& artifacts, const ExperimentConfig& cfg, std::vector<TelemetryRecord>* out,
                         std::shared_ptr<CommandQueue> queue) {
  Simulation sim(artifacts, cfg, make_policy(cfg.policy, std::move(queue)));
  while (!sim.finished()) sim.step();
  RunReport rep = summarize(sim.records(), cfg.pf, cfg.goal_radius);
  rep.name = cfg.name;
  rep.policy = policy_name(cfg.policy.kind);
  rep.telemetry = cfg.name + ".csv";
  if (out) *out = sim.records();
  return rep;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
  const Artifacts artifacts = load_artifacts(cfg);
  std::vector<TelemetryRecord> records;
  RunReport rep = run_simulation(artifacts, cfg, &records);
  const auto dir = cfg.output_dir.empty() ? std::filesystem::path(".") : cfg.output_dir;
  std::filesystem::create_directories(dir);
  write_telemetry_csv(dir / (cfg.name + ".csv"), records);
  write_report_json(dir / (cfg.name + ".json"), rep);
  return rep;
}

}  // namespace sharednav
