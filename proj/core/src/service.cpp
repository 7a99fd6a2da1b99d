#include "sharednav/service.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sharednav/error.hpp"

namespace sharednav {

using nlohmann::json;

CommandParse parse_command(const std::string& body, double tau_max, double v_max) {
  CommandParse out;
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error&) {
    out.error = "command is not valid JSON";
    return out;
  }
  if (!j.is_object()) {
    out.error = "command must be a JSON object";
    return out;
  }
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"] != kFrameSchemaVersion) {
    out.error = "unsupported or missing schema version";
    return out;
  }
  if (!j.contains("token") || !j["token"].is_string()) {
    out.error = "missing driver token";
    return out;
  }
  for (const char* key : {"torque", "speed"}) {
    if (!j.contains(key) || !j[key].is_number() || !std::isfinite(j[key].get<double>())) {
      out.error = std::string("field '") + key + "' must be a finite number";
      return out;
    }
  }
  if (j.contains("override") && !j["override"].is_boolean()) {
    out.error = "field 'override' must be a boolean";
    return out;
  }
  out.token = j["token"].get<std::string>();
  const double torque = j["torque"].get<double>();
  const double speed = j["speed"].get<double>();
  DriveCommand c;
  c.torque = std::clamp(torque, -tau_max, tau_max);
  c.speed = std::clamp(speed, 0.0, v_max);
  c.clamped = c.torque != torque || c.speed != speed;
  c.override_release = j.value("override", false);
  out.command = c;
  return out;
}

std::string state_frame(const TelemetryRecord& r) {
  json j;
  j["type"] = "state";
  j["version"] = kFrameSchemaVersion;
  j["seq"] = r.step;
  for_each_telemetry_field(r, [&](const std::string& name, double v, bool integral) {
    if (integral)
      j[name] = static_cast<long long>(v);
    else
      j[name] = v;
  });
  return j.dump();
}

std::string error_frame(const std::string& code, const std::string& message) {
  return json{{"type", "error"}, {"version", kFrameSchemaVersion}, {"code", code}, {"message", message}}.dump();
}

std::string session_frame(const Artifacts& artifacts, const Mission& mission, const ExperimentConfig& cfg,
                          const ServiceOptions& options) {
  json j;
  j["type"] = "session";
  j["version"] = kFrameSchemaVersion;
  j["dt"] = cfg.dt;
  j["duration"] = cfg.duration;
  j["stepped"] = options.stepped;
  j["limits"] = {{"tau_max", options.tau_max},
                 {"v_max", cfg.control.vehicle.v_max},
                 {"alpha_max", cfg.control.vehicle.alpha_max}};
  j["columns"] = telemetry_columns();

  const auto& g = artifacts.grid;
  std::string occ;
  occ.reserve(g.cells().size());
  for (const auto c : g.cells()) occ.push_back(c == Occupancy::Free ? '.' : c == Occupancy::Occupied ? '#' : '?');
  j["map"] = {{"width", g.width()},
              {"height", g.height()},
              {"resolution", g.resolution()},
              {"origin", {g.origin().x, g.origin().y, g.origin().theta}},
              {"cells", occ}};

  json path = json::array();
  for (const auto& s : mission.samples) path.push_back({s.x, s.y});
  json cells = json::array();
  for (const auto& c : mission.cells)
    cells.push_back({{"ix", c.cell.ix},
                     {"iy", c.cell.iy},
                     {"s_begin", c.s_begin},
                     {"reference", behaviour_name(c.reference)},
                     {"direction", c.reference_direction},
                     {"from_map", c.from_map}});
  j["mission"] = {{"p0", {mission.p0.x, mission.p0.y}}, {"pf", {mission.pf.x, mission.pf.y}}, {"path", path},
                  {"cells", cells}};

  const auto& bm = artifacts.behaviour_map;
  json clusters = json::array();
  for (const auto& [cell, list] : bm.cells())
    for (const auto& c : list)
      clusters.push_back({{"ix", cell.ix},
                          {"iy", cell.iy},
                          {"class", behaviour_name(c.behaviour)},
                          {"direction", c.direction},
                          {"members", c.member_count}});
  j["behaviour_map"] = {{"origin", {bm.grid().origin().x, bm.grid().origin().y}},
                        {"cell_size", bm.grid().cell_size()},
                        {"nx", bm.grid().nx()},
                        {"ny", bm.grid().ny()},
                        {"clusters", clusters}};
  return j.dump();
}

struct SessionService::Impl {
  const Artifacts& artifacts;
  ExperimentConfig cfg;
  ServiceOptions options;
  std::shared_ptr<CommandQueue> commands = std::make_shared<CommandQueue>();
  std::unique_ptr<Simulation> sim;
  std::string session;

  // Outbound frames, written by the loop only.
  std::mutex frames_mutex;
  std::condition_variable frames_cv;
  std::deque<std::pair<std::size_t, std::string>> frames;
  std::size_t produced = 0;
  bool finished = false;

  std::mutex driver_mutex;
  std::optional<std::string> driver;

  std::mutex step_mutex;
  std::condition_variable step_cv;
  std::size_t step_requests = 0;

  std::atomic<bool> stopping{false};
  httplib::Server server;
  std::thread loop_thread;
  std::thread http_thread;

  Impl(const Artifacts& a, ExperimentConfig c, ServiceOptions o)
      : artifacts(a), cfg(std::move(c)), options(std::move(o)) {
    // A replay session is view-only; anything else is driven live.
    if (cfg.policy.kind != PolicyKind::Replay) cfg.policy.kind = PolicyKind::External;
    sim = std::make_unique<Simulation>(artifacts, cfg, make_policy(cfg.policy, commands));
    session = session_frame(artifacts, sim->mission(), cfg, options);
  }

  void publish(const TelemetryRecord& r) {
    std::string f = state_frame(r);
    {
      std::lock_guard lock(frames_mutex);
      frames.emplace_back(r.step, std::move(f));
      while (frames.size() > options.frame_buffer) frames.pop_front();
      produced = r.step + 1;
    }
    frames_cv.notify_all();
  }

  void loop() {
    using Clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(cfg.dt));
    auto next = Clock::now();
    while (!stopping && !sim->finished()) {
      if (options.stepped) {
        std::unique_lock lock(step_mutex);
        step_cv.wait(lock, [&] { return stopping || step_requests > 0; });
        if (stopping) break;
        --step_requests;
      } else {
        next += period;
        std::this_thread::sleep_until(next);
      }
      publish(sim->step());
    }
    {
      std::lock_guard lock(frames_mutex);
      finished = true;
    }
    frames_cv.notify_all();
  }

  json status() {
    json j{{"type", "status"}, {"version", kFrameSchemaVersion}};
    {
      std::lock_guard lock(frames_mutex);
      j["frames"] = produced;
      j["finished"] = finished;
    }
    std::lock_guard lock(driver_mutex);
    j["driver"] = driver.has_value();
    return j;
  }

  static void reply_error(httplib::Response& res, int status, const std::string& code, const std::string& msg) {
    res.status = status;
    res.set_content(error_frame(code, msg), "application/json");
  }

  static std::string new_token() {
    std::random_device rd;
    char buf[33];
    std::snprintf(buf, sizeof buf, "%08x%08x%08x%08x", rd(), rd(), rd(), rd());
    return buf;
  }

  void routes() {
    server.Get("/api/session", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(session, "application/json");
    });
    server.Get("/api/status", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(status().dump(), "application/json");
    });
    server.Post("/api/driver", [this](const httplib::Request&, httplib::Response& res) {
      if (cfg.policy.kind == PolicyKind::Replay)
        return reply_error(res, 409, "replay_session", "a replay session cannot be driven");
      std::lock_guard lock(driver_mutex);
      if (driver) return reply_error(res, 409, "driver_conflict", "another driver is connected");
      driver = new_token();
      res.set_content(json{{"type", "driver"}, {"version", kFrameSchemaVersion}, {"token", *driver}}.dump(),
                      "application/json");
    });
    server.Delete("/api/driver", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string token = req.get_param_value("token");
      std::lock_guard lock(driver_mutex);
      if (!driver || token != *driver) return reply_error(res, 403, "not_driver", "token does not own the session");
      driver.reset();
      commands->push({CommandQueue::Event::Kind::DriverLeft, {}});
      res.set_content(json{{"type", "driver"}, {"version", kFrameSchemaVersion}, {"released", true}}.dump(),
                      "application/json");
    });
    server.Post("/api/command", [this](const httplib::Request& req, httplib::Response& res) {
      const auto parsed = parse_command(req.body, options.tau_max, cfg.control.vehicle.v_max);
      if (!parsed.command) return reply_error(res, 400, "malformed_command", parsed.error);
      {
        std::lock_guard lock(driver_mutex);
        if (!driver || parsed.token != *driver)
          return reply_error(res, 403, "not_driver", "token does not own the session");
        commands->push({CommandQueue::Event::Kind::Command, *parsed.command});
      }
      res.set_content(json{{"type", "ack"},
                           {"version", kFrameSchemaVersion},
                           {"clamped", parsed.command->clamped},
                           {"torque", parsed.command->torque},
                           {"speed", parsed.command->speed}}
                          .dump(),
                      "application/json");
    });
    server.Post("/api/step", [this](const httplib::Request& req, httplib::Response& res) {
      if (!options.stepped) return reply_error(res, 409, "not_stepped", "session runs in real time");
      long count = 1;
      if (!req.body.empty()) {
        try {
          const auto j = json::parse(req.body);
          count = j.value("count", 1L);
        } catch (const json::exception&) {
          return reply_error(res, 400, "malformed_step", "body must be {\"count\": n}");
        }
      }
      if (count < 1 || count > 100000) return reply_error(res, 400, "malformed_step", "count out of range");
      std::size_t target;
      {
        std::lock_guard lock(frames_mutex);
        target = produced + static_cast<std::size_t>(count);
      }
      {
        std::lock_guard lock(step_mutex);
        step_requests += static_cast<std::size_t>(count);
      }
      step_cv.notify_all();
      std::unique_lock lock(frames_mutex);
      frames_cv.wait_for(lock, std::chrono::seconds(30), [&] { return produced >= target || finished || stopping; });
      res.set_content(json{{"type", "status"}, {"version", kFrameSchemaVersion}, {"frames", produced},
                           {"finished", finished}}
                          .dump(),
                      "application/json");
    });
    server.Get("/api/frames", [this](const httplib::Request& req, httplib::Response& res) {
      long long after = -1;
      std::size_t limit = 500;
      try {
        if (req.has_param("after")) after = std::stoll(req.get_param_value("after"));
        if (req.has_param("limit")) limit = std::stoul(req.get_param_value("limit"));
      } catch (const std::exception&) {
        return reply_error(res, 400, "malformed_query", "after and limit must be integers");
      }
      std::string body = "[";
      std::size_t n = 0;
      {
        std::lock_guard lock(frames_mutex);
        for (const auto& [seq, f] : frames) {
          if (static_cast<long long>(seq) <= after) continue;
          if (n == limit) break;
          if (n++) body += ',';
          body += f;
        }
      }
      body += ']';
      res.set_content(body, "application/json");
    });
    server.Get("/api/stream", [this](const httplib::Request&, httplib::Response& res) {
      auto cursor = std::make_shared<std::size_t>(0);
      {
        std::lock_guard lock(frames_mutex);
        *cursor = produced;  // live frames only; history is available from /api/frames
      }
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) {
        std::string out;
        bool done = false;
        {
          std::unique_lock lock(frames_mutex);
          frames_cv.wait_for(lock, std::chrono::milliseconds(250),
                             [&] { return produced > *cursor || finished || stopping; });
          for (const auto& [seq, f] : frames) {
            if (seq < *cursor) continue;
            out += "id: " + std::to_string(seq) + "\ndata: " + f + "\n\n";
            *cursor = seq + 1;
          }
          done = (finished && *cursor >= produced) || stopping;
        }
        if (!out.empty() && !sink.write(out.data(), out.size())) return false;
        if (done) {
          sink.done();
          return true;
        }
        if (out.empty()) {
          static const char keepalive[] = ": keepalive\n\n";
          if (!sink.write(keepalive, sizeof keepalive - 1)) return false;
        }
        return true;
      });
    });
    if (!options.assets.empty()) {
      if (!server.set_mount_point("/", options.assets.string()))
        throw InvalidArgument("asset directory not found: " + options.assets.string());
    }
  }
};

SessionService::SessionService(const Artifacts& artifacts, ExperimentConfig cfg, ServiceOptions options)
    : impl_(std::make_unique<Impl>(artifacts, std::move(cfg), std::move(options))) {
  impl_->routes();
}

SessionService::~SessionService() { stop(); }

int SessionService::start() {
  auto& s = impl_->server;
  port_ = impl_->options.port == 0 ? s.bind_to_any_port(impl_->options.host)
                                   : (s.bind_to_port(impl_->options.host, impl_->options.port) ? impl_->options.port
                                                                                              : -1);
  if (port_ < 0) throw Error("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  impl_->http_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->loop_thread = std::thread([this] { impl_->loop(); });
  s.wait_until_ready();
  return port_;
}

void SessionService::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->step_cv.notify_all();
  impl_->frames_cv.notify_all();
  impl_->server.stop();
  if (impl_->loop_thread.joinable()) impl_->loop_thread.join();
  if (impl_->http_thread.joinable()) impl_->http_thread.join();
}

void SessionService::wait() {
  if (impl_->http_thread.joinable()) impl_->http_thread.join();
}

}  // namespace sharednav
