#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "sharednav/simulation.hpp"

namespace sharednav {

/// Version of the frame schema shared with clients.
inline constexpr int kFrameSchemaVersion = 1;

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;              // 0 picks a free port
  std::filesystem::path assets; // static files served under /, optional
  bool stepped = false;         // advance only on /api/step instead of in real time
  double tau_max = 20.0;        // N m, bound of inbound steering torque
  std::size_t frame_buffer = 3000;  // frames kept for /api/frames
};

struct CommandParse {
  std::optional<DriveCommand> command;
  std::string token;
  std::string error;  // set when the frame is rejected
};

/// Validates and clamps an inbound command frame:
///   {"version": 1, "token": str, "torque": N m, "speed": m/s, "override": bool (optional)}
CommandParse parse_command(const std::string& body, double tau_max, double v_max);

/// Outbound state frame for one telemetry record.
std::string state_frame(const TelemetryRecord& r);
/// {"type": "error", "version": 1, "code": ..., "message": ...}
std::string error_frame(const std::string& code, const std::string& message);
/// Session start: schema version, limits, map, mission path and behavioural map.
std::string session_frame(const Artifacts& artifacts, const Mission& mission, const ExperimentConfig& cfg,
                          const ServiceOptions& options);

/// Live session: one simulation loop thread plus the HTTP server. The loop owns the
/// simulation; the HTTP handlers exchange data with it only through the command queue
/// and the outbound frame buffer. A config with the replay policy gives a view-only
/// session; any other policy is replaced by the live driver.
class SessionService {
 public:
  SessionService(const Artifacts& artifacts, ExperimentConfig cfg, ServiceOptions options);
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  /// Binds and starts both threads; returns the bound port.
  int start();
  void stop();
  /// Blocks until stop() is called from another thread or the server fails.
  void wait();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace sharednav
