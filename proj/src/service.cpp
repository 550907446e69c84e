#include "wip/service.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "wip/dataset.hpp"

namespace wip {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

nlohmann::json PredictResponse::to_json() const {
  return {{"label", label},
          {"probabilities", probabilities},
          {"inference_ms", inference_ms},
          {"model_id", model_id}};
}

PredictResponse PredictResponse::from_json(const nlohmann::json& j) {
  PredictResponse r;
  r.label = j.at("label").get<std::string>();
  const auto p = j.at("probabilities").get<std::vector<double>>();
  if (p.size() != kNumGestures) throw std::runtime_error("response: expected 9 probabilities");
  std::copy(p.begin(), p.end(), r.probabilities.begin());
  r.inference_ms = j.at("inference_ms").get<double>();
  r.model_id = j.at("model_id").get<std::string>();
  return r;
}

PredictRequest parse_predict_request(const std::string& body, const WindowConfig& window) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    // parse_error, or out_of_range for an overflowing number literal
    throw RequestError(400, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("frames")) throw RequestError(400, "missing 'frames'");
  PredictRequest req;
  if (j.contains("client_timestamp")) {
    if (!j["client_timestamp"].is_number()) throw RequestError(400, "client_timestamp must be a number");
    req.client_timestamp = j["client_timestamp"].get<double>();
  }
  const auto& frames = j["frames"];
  if (!frames.is_array()) throw RequestError(400, "'frames' must be an array");
  // element types first so that a shape error is never masked by a type error
  for (const auto& f : frames) {
    if (!f.is_array()) throw RequestError(400, "each frame must be an array of devices");
    for (const auto& d : f) {
      if (!d.is_array()) throw RequestError(400, "each device must be an array of features");
      for (const auto& v : d) {
        if (!v.is_number()) throw RequestError(400, "features must be numbers");
      }
    }
  }
  if (frames.size() != window.window_frames) {
    throw RequestError(422, "expected " + std::to_string(window.window_frames) + " frames, got " +
                                std::to_string(frames.size()));
  }
  req.points = Matrix<double>(window.points(), kFeaturesPerDevice);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].size() != kNumDevices) {
      throw RequestError(422, "frame " + std::to_string(f) + ": expected 3 devices");
    }
    for (std::size_t d = 0; d < kNumDevices; ++d) {
      const auto& dev = frames[f][d];
      if (dev.size() != kFeaturesPerDevice) {
        throw RequestError(422, "frame " + std::to_string(f) + " device " + std::to_string(d) +
                                    ": expected 12 features");
      }
      for (std::size_t c = 0; c < kFeaturesPerDevice; ++c) {
        const double v = dev[c].get<double>();
        if (!std::isfinite(v)) throw RequestError(400, "features must be finite");
        req.points(f * kNumDevices + d, c) = v;
      }
    }
  }
  return req;
}

nlohmann::json predict_request_json(std::span<const Frame> frames, double client_timestamp) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : frames) {
    nlohmann::json devs = nlohmann::json::array();
    for (const auto& d : f.devices) devs.push_back(d.features());
    arr.push_back(devs);
  }
  return {{"frames", arr}, {"client_timestamp", client_timestamp}};
}

InferenceService::InferenceService(Checkpoint ck) : ck_(std::move(ck)) {
  ck_.stats.validate();
  ck_.window.validate();
}

PredictResponse InferenceService::predict(const PredictRequest& req) const {
  const auto t0 = Clock::now();
  Matrix<double> x = req.points;
  normalize_points(x, ck_.stats);
  const Prediction p = ck_.model.predict(matrix_cast<float>(x));
  PredictResponse r;
  r.inference_ms = ms_since(t0);
  r.label = std::string(name_of(p.label));
  r.probabilities = p.probabilities;
  r.model_id = ck_.model_id;
  return r;
}

nlohmann::json InferenceService::health() const {
  return {{"status", "ok"},
          {"model_id", ck_.model_id},
          {"window_frames", ck_.window.window_frames},
          {"step_frames", ck_.window.step_frames},
          {"sample_rate", ck_.window.sample_rate},
          {"labels", std::vector<std::string>(kGestureNames.begin(), kGestureNames.end())}};
}

HttpReply InferenceService::handle_predict(const std::string& body) const {
  try {
    return {200, predict(parse_predict_request(body, ck_.window)).to_json().dump()};
  } catch (const RequestError& e) {
    return {e.status, nlohmann::json{{"error", e.what()}}.dump()};
  }
}

BindAddress parse_bind_address(const std::string& s) {
  BindAddress a;
  const auto colon = s.rfind(':');
  std::string port = s;
  if (colon != std::string::npos) {
    if (colon > 0) a.host = s.substr(0, colon);
    port = s.substr(colon + 1);
  }
  try {
    std::size_t used = 0;
    a.port = std::stoi(port, &used);
    if (used != port.size() || a.port < 0 || a.port > 65535) throw std::invalid_argument(port);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad bind address '" + s + "', expected host:port");
  }
  return a;
}

HttpServer::HttpServer(std::shared_ptr<const InferenceService> service)
    : service_(std::move(service)), server_(std::make_unique<httplib::Server>()) {
  server_->set_tcp_nodelay(true);
  install_routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
  auto svc = service_;
  server_->Get("/health", [svc](const httplib::Request&, httplib::Response& res) {
    res.set_content(svc->health().dump(), "application/json");
  });
  server_->Post("/predict", [svc](const httplib::Request& req, httplib::Response& res) {
    const HttpReply r = svc->handle_predict(req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
}

int HttpServer::start(const BindAddress& addr) {
  int port = addr.port;
  if (port == 0) {
    port = server_->bind_to_any_port(addr.host);
  } else if (!server_->bind_to_port(addr.host, port)) {
    port = -1;
  }
  if (port < 0) {
    throw std::runtime_error("cannot bind " + addr.host + ":" + std::to_string(addr.port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void HttpServer::run(const BindAddress& addr) {
  if (!server_->listen(addr.host, addr.port)) {
    throw std::runtime_error("cannot listen on " + addr.host + ":" + std::to_string(addr.port));
  }
}

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::vector<std::size_t> replay_window_starts(std::size_t n_frames, std::size_t window_frames,
                                              std::size_t cadence_frames) {
  if (window_frames == 0 || cadence_frames == 0) {
    throw std::invalid_argument("window and cadence must be positive");
  }
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s + window_frames <= n_frames; s += cadence_frames) out.push_back(s);
  return out;
}

namespace {

class ServiceClient {
 public:
  explicit ServiceClient(const ReplayConfig& cfg) : cfg_(cfg) {
    const BindAddress a = parse_bind_address(cfg.address);
    cli_ = std::make_unique<httplib::Client>(a.host, a.port);
    cli_->set_connection_timeout(std::chrono::seconds(2));
    cli_->set_read_timeout(std::chrono::seconds(10));
    cli_->set_keep_alive(true);
    cli_->set_tcp_nodelay(true);
  }

  nlohmann::json get_health() {
    return with_retry([&] { return cli_->Get("/health"); });
  }

  nlohmann::json post_predict(const std::string& body, double* round_trip_ms) {
    const auto t0 = Clock::now();
    auto j = with_retry([&] { return cli_->Post("/predict", body, "application/json"); });
    *round_trip_ms = ms_since(t0);
    return j;
  }

 private:
  template <typename F>
  nlohmann::json with_retry(F&& call) {
    double wait = cfg_.backoff_ms;
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (auto res = call()) {
        if (res->status != 200) {
          throw std::runtime_error("service returned " + std::to_string(res->status) + ": " +
                                   res->body);
        }
        return nlohmann::json::parse(res->body);
      } else {
        last_error = httplib::to_string(res.error());
      }
      if (attempt < cfg_.max_retries) {
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(wait));
        wait *= 2;
      }
    }
    throw std::runtime_error("service at " + cfg_.address + " unreachable after " +
                             std::to_string(cfg_.max_retries + 1) + " attempts: " + last_error);
  }

  const ReplayConfig& cfg_;
  std::unique_ptr<httplib::Client> cli_;
};

}  // namespace

SessionReport replay(const SubjectRecording& rec, const ReplayConfig& cfg) {
  if (cfg.cadence_frames == 0) throw std::invalid_argument("cadence_frames must be positive");
  if (!(cfg.speed > 0)) throw std::invalid_argument("speed must be positive");
  ServiceClient client(cfg);
  const auto health = client.get_health();

  SessionReport rep;
  rep.subject = rec.profile.subject_id;
  rep.model_id = health.at("model_id").get<std::string>();
  rep.window.window_frames = health.at("window_frames").get<std::size_t>();
  rep.window.step_frames = health.value("step_frames", rep.window.window_frames);
  rep.window.sample_rate = health.value("sample_rate", kSampleRate);
  rep.cadence_frames = cfg.cadence_frames;
  const std::size_t w = rep.window.window_frames;

  LocomotionController loco(cfg.locomotion);
  const auto starts = replay_window_starts(rec.frames.size(), w, cfg.cadence_frames);
  std::size_t next_window = 0, correct = 0;
  std::vector<Frame> frames(w);
  std::vector<Gesture> labels(w);
  const auto wall0 = Clock::now();
  const double t_first = rec.frames.empty() ? 0.0 : rec.frames.front().frame.timestamp;

  for (std::size_t i = 0; i < rec.frames.size(); ++i) {
    const Frame& f = rec.frames[i].frame;
    if (cfg.realtime) {
      const auto due = wall0 + std::chrono::duration_cast<Clock::duration>(
                                   std::chrono::duration<double>((f.timestamp - t_first) / cfg.speed));
      std::this_thread::sleep_until(due);
    }
    loco.on_frame(f.timestamp, f.device(Device::Hmd).position[1],
                  f.device(Device::LeftTracker).rotation[1],
                  f.device(Device::RightTracker).rotation[1]);

    while (next_window < starts.size() && starts[next_window] + w - 1 == i) {
      const std::size_t s = starts[next_window];
      for (std::size_t k = 0; k < w; ++k) {
        frames[k] = rec.frames[s + k].frame;
        labels[k] = rec.frames[s + k].label;
      }
      ReplayWindow win;
      win.index = next_window;
      win.first_frame = s;
      win.timestamp = f.timestamp;
      win.truth = std::string(name_of(majority_label(labels)));
      const std::string body = predict_request_json(frames, f.timestamp).dump();
      const auto resp = PredictResponse::from_json(client.post_predict(body, &win.round_trip_ms));
      win.label = resp.label;
      win.inference_ms = resp.inference_ms;
      win.latency_ms = rep.window.duration_ms() + win.round_trip_ms + win.inference_ms;
      win.commands = loco.on_prediction(gesture_from_name(resp.label), f.timestamp);
      correct += win.label == *win.truth;
      rep.windows.push_back(std::move(win));
      ++next_window;
    }
  }
  if (!rep.windows.empty()) {
    rep.windowed_accuracy = static_cast<double>(correct) / static_cast<double>(rep.windows.size());
  }
  return rep;
}

std::string SessionReport::to_jsonl() const {
  std::string out;
  for (const auto& w : windows) {
    nlohmann::json cmds = nlohmann::json::array();
    for (const auto& c : w.commands) cmds.push_back(c.to_json());
    nlohmann::json j = {{"window", w.index},
                        {"first_frame", w.first_frame},
                        {"t", w.timestamp},
                        {"label", w.label},
                        {"inference_ms", w.inference_ms},
                        {"round_trip_ms", w.round_trip_ms},
                        {"latency_ms", w.latency_ms},
                        {"commands", cmds}};
    j["truth"] = w.truth ? nlohmann::json(*w.truth) : nlohmann::json();
    out += j.dump() + "\n";
  }
  double min_latency = windows.empty() ? 0.0 : windows.front().latency_ms;
  for (const auto& w : windows) min_latency = std::min(min_latency, w.latency_ms);
  nlohmann::json summary = {{"summary", true},
                            {"subject", subject},
                            {"model_id", model_id},
                            {"window_frames", window.window_frames},
                            {"cadence_frames", cadence_frames},
                            {"windows", windows.size()},
                            {"min_latency_ms", min_latency},
                            {"latency_at_least_window", min_latency >= window.duration_ms()}};
  summary["windowed_accuracy"] =
      windowed_accuracy ? nlohmann::json(*windowed_accuracy) : nlohmann::json();
  out += summary.dump() + "\n";
  return out;
}

}  // namespace wip
