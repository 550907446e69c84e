#pragma once

// HTTP inference service (POST /predict, GET /health) and the replay client
// that streams a recording against it and drives the locomotion controller.

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "wip/checkpoint.hpp"
#include "wip/locomotion.hpp"
#include "wip/synthgen.hpp"

namespace httplib {
class Server;
}

namespace wip {

struct PredictRequest {
  Matrix<double> points;  // raw features, row (f * 3 + d)
  double client_timestamp = 0;
};

struct PredictResponse {
  std::string label;
  std::array<double, kNumGestures> probabilities{};
  double inference_ms = 0;
  std::string model_id;

  nlohmann::json to_json() const;
  static PredictResponse from_json(const nlohmann::json& j);
};

// Thrown for requests the service rejects; status is 400 or 422.
struct RequestError : std::runtime_error {
  RequestError(int status, const std::string& msg) : std::runtime_error(msg), status(status) {}
  int status;
};

// Body: {"frames": [window_frames][3][12] raw floats, "client_timestamp": s}.
// Malformed JSON or fields -> 400, wrong frame shape -> 422.
PredictRequest parse_predict_request(const std::string& body, const WindowConfig& window);
nlohmann::json predict_request_json(std::span<const Frame> frames, double client_timestamp);

struct HttpReply {
  int status = 200;
  std::string body;
};

class InferenceService {
 public:
  explicit InferenceService(Checkpoint checkpoint);

  // Applies the stored normalisation, then eval-mode prediction.
  PredictResponse predict(const PredictRequest& req) const;
  nlohmann::json health() const;
  HttpReply handle_predict(const std::string& body) const;

  const WindowConfig& window() const { return ck_.window; }
  const std::string& model_id() const { return ck_.model_id; }

 private:
  Checkpoint ck_;
};

struct BindAddress {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
};

// "host:port" or ":port" or "port".
BindAddress parse_bind_address(const std::string& s);

class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<const InferenceService> service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start(const BindAddress& addr);
  // Binds and serves on the calling thread until stop().
  void run(const BindAddress& addr);
  void stop();

 private:
  void install_routes();
  std::shared_ptr<const InferenceService> service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

struct ReplayConfig {
  std::string address = "127.0.0.1:8080";
  std::size_t cadence_frames = 6;  // 6 = 180 ms, 3 = 90 ms at 30 Hz
  bool realtime = false;
  double speed = 1.0;  // pacing multiplier in realtime mode
  int max_retries = 5;
  double backoff_ms = 100;  // doubled after every failed attempt
  LocomotionConfig locomotion;
};

struct ReplayWindow {
  std::size_t index = 0;
  std::size_t first_frame = 0;
  double timestamp = 0;  // time of the last frame in the window
  std::string label;
  std::optional<std::string> truth;
  double inference_ms = 0;
  double round_trip_ms = 0;
  double latency_ms = 0;  // window duration + round trip + inference
  std::vector<AvatarCommand> commands;
};

struct SessionReport {
  std::string subject;
  std::string model_id;
  WindowConfig window;
  std::size_t cadence_frames = 0;
  std::vector<ReplayWindow> windows;
  std::optional<double> windowed_accuracy;

  // One JSON object per window, then a summary line.
  std::string to_jsonl() const;
};

// First frame index of every window the replay submits.
std::vector<std::size_t> replay_window_starts(std::size_t n_frames, std::size_t window_frames,
                                              std::size_t cadence_frames);

// Throws std::runtime_error when the service stays unreachable after the
// configured retries.
SessionReport replay(const SubjectRecording& recording, const ReplayConfig& cfg);

}  // namespace wip
