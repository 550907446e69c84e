#include "wip/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace wip {
namespace {

constexpr std::array<std::string_view, kNumDevices> kDeviceNames = {"hmd", "left", "right"};

std::string fmt(double v) {
  std::array<char, 32> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                               std::chars_format::general, 17);
  return std::string(buf.data(), p);
}

double parse_double(std::string_view s, const char* what) {
  double v = 0;
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw std::runtime_error(std::string("bad number in ") + what + ": '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto at = line.find(sep, start);
    out.push_back(line.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

std::string column_header() {
  std::string h = "timestamp";
  for (auto dev : kDeviceNames) {
    for (auto ch : kChannelNames) {
      h += ',';
      h += dev;
      h += '_';
      h += ch;
    }
  }
  return h + ",label";
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::random_device rd;
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp);
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string recording_to_csv(const SubjectRecording& rec) {
  const auto& p = rec.profile;
  std::string out = "# subject_id=" + p.subject_id +
                    ",standing_head_height=" + fmt(p.standing_head_height) +
                    ",amplitude_scale=" + fmt(p.amplitude_scale) +
                    ",frequency_pref=" + fmt(p.frequency_pref) +
                    ",phase_jitter=" + fmt(p.phase_jitter) +
                    ",noise_sigma=" + fmt(p.noise_sigma) +
                    ",step_length=" + fmt(p.step_length) + "\n";
  out += column_header() + "\n";
  for (const auto& lf : rec.frames) {
    out += fmt(lf.frame.timestamp);
    for (double v : lf.frame.features()) {
      out += ',';
      out += fmt(v);
    }
    out += ',';
    out += name_of(lf.label);
    out += '\n';
  }
  return out;
}

SubjectRecording recording_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  SubjectRecording rec;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw std::runtime_error("recording: missing profile line");
  }
  for (auto kv : split(trim_cr(std::string_view(line).substr(2)), ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw std::runtime_error("recording: bad profile field");
    const auto key = kv.substr(0, eq);
    const auto val = kv.substr(eq + 1);
    auto& p = rec.profile;
    if (key == "subject_id") p.subject_id = std::string(val);
    else if (key == "standing_head_height") p.standing_head_height = parse_double(val, "profile");
    else if (key == "amplitude_scale") p.amplitude_scale = parse_double(val, "profile");
    else if (key == "frequency_pref") p.frequency_pref = parse_double(val, "profile");
    else if (key == "phase_jitter") p.phase_jitter = parse_double(val, "profile");
    else if (key == "noise_sigma") p.noise_sigma = parse_double(val, "profile");
    else if (key == "step_length") p.step_length = parse_double(val, "profile");
  }
  if (!std::getline(in, line) || trim_cr(line) != column_header()) {
    throw std::runtime_error("recording: unexpected column header");
  }
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    const auto row = trim_cr(line);
    if (row.empty()) continue;
    const auto cells = split(row, ',');
    if (cells.size() != kFrameFeatures + 2) {
      throw std::runtime_error("recording: line " + std::to_string(lineno) + " has " +
                               std::to_string(cells.size()) + " fields");
    }
    LabeledFrame lf;
    lf.frame.timestamp = parse_double(cells[0], "timestamp");
    std::array<double, kFrameFeatures> f{};
    for (std::size_t i = 0; i < kFrameFeatures; ++i) f[i] = parse_double(cells[i + 1], "frame");
    for (std::size_t d = 0; d < kNumDevices; ++d) {
      lf.frame.devices[d] = DeviceSample::from_features(f.data() + d * kFeaturesPerDevice);
    }
    lf.label = gesture_from_name(cells.back());
    rec.frames.push_back(lf);
  }
  return rec;
}

void write_recording(const fs::path& path, const SubjectRecording& rec) {
  write_file_atomic(path, recording_to_csv(rec));
}

SubjectRecording read_recording(const fs::path& path) {
  try {
    return recording_from_csv(read_file(path));
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) &&
        std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      const auto na = a.substr(i, ie - i), nb = b.substr(j, je - j);
      const auto sa = na.find_first_not_of('0'), sb = nb.find_first_not_of('0');
      const std::string ta = sa == std::string::npos ? "" : na.substr(sa);
      const std::string tb = sb == std::string::npos ? "" : nb.substr(sb);
      if (ta.size() != tb.size()) return ta.size() < tb.size();
      if (ta != tb) return ta < tb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

std::vector<fs::path> list_recordings(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    return natural_less(a.filename().string(), b.filename().string());
  });
  return out;
}

std::vector<SubjectRecording> load_recordings(const fs::path& dir) {
  const auto files = list_recordings(dir);
  if (files.empty()) throw std::runtime_error("no recordings in " + dir.string());
  std::vector<SubjectRecording> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(read_recording(f));
  return out;
}

nlohmann::json to_json(const WindowConfig& cfg) {
  return {{"window_frames", cfg.window_frames},
          {"step_frames", cfg.step_frames},
          {"sample_rate", cfg.sample_rate}};
}

WindowConfig window_config_from_json(const nlohmann::json& j) {
  WindowConfig c;
  c.window_frames = j.at("window_frames").get<std::size_t>();
  c.step_frames = j.at("step_frames").get<std::size_t>();
  c.sample_rate = j.value("sample_rate", kSampleRate);
  c.validate();
  return c;
}

nlohmann::json to_json(const NormalizationStats& s) {
  nlohmann::json names = nlohmann::json::array();
  for (auto n : kChannelNames) names.push_back(std::string(n));
  return {{"channels", names}, {"min", s.min}, {"max", s.max}};
}

NormalizationStats norm_stats_from_json(const nlohmann::json& j) {
  NormalizationStats s;
  const auto mn = j.at("min").get<std::vector<double>>();
  const auto mx = j.at("max").get<std::vector<double>>();
  if (mn.size() != kFeaturesPerDevice || mx.size() != kFeaturesPerDevice) {
    throw std::runtime_error("normalization stats need 12 min and 12 max values");
  }
  std::copy(mn.begin(), mn.end(), s.min.begin());
  std::copy(mx.begin(), mx.end(), s.max.begin());
  s.validate();
  return s;
}

nlohmann::json label_vocabulary() {
  nlohmann::json v = nlohmann::json::array();
  for (auto n : kGestureNames) v.push_back(std::string(n));
  return v;
}

void check_label_vocabulary(const nlohmann::json& j) {
  if (j != label_vocabulary()) throw std::runtime_error("label vocabulary mismatch");
}

void write_dataset_archive(const fs::path& dir, const DatasetArchive& a) {
  fs::create_directories(dir);
  nlohmann::json subjects = nlohmann::json::array();
  for (const auto& s : a.subjects) {
    std::string text;
    for (const auto& w : s.windows) {
      text += std::to_string(w.first_frame);
      text += ',';
      text += std::to_string(index_of(w.label));
      for (double v : w.points.storage()) {
        text += ',';
        text += fmt(v);
      }
      text += '\n';
    }
    write_file_atomic(dir / (s.subject_id + ".csv"), text);
    subjects.push_back({{"id", s.subject_id}, {"samples", s.windows.size()}});
  }
  write_file_atomic(dir / "stats.json", to_json(a.stats).dump(2) + "\n");
  nlohmann::json meta = {{"window", to_json(a.window)},
                         {"labels", label_vocabulary()},
                         {"points", a.window.points()},
                         {"features", kFeaturesPerDevice},
                         {"subjects", subjects}};
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

bool is_dataset_archive(const fs::path& dir) {
  return fs::is_regular_file(dir / "meta.json") && fs::is_regular_file(dir / "stats.json");
}

DatasetArchive read_dataset_archive(const fs::path& dir) {
  DatasetArchive a;
  const auto meta = nlohmann::json::parse(read_file(dir / "meta.json"));
  a.window = window_config_from_json(meta.at("window"));
  check_label_vocabulary(meta.at("labels"));
  a.stats = norm_stats_from_json(nlohmann::json::parse(read_file(dir / "stats.json")));
  const std::size_t rows = a.window.points();
  const std::size_t width = rows * kFeaturesPerDevice + 2;
  for (const auto& s : meta.at("subjects")) {
    SubjectWindows sw;
    sw.subject_id = s.at("id").get<std::string>();
    const std::string text = read_file(dir / (sw.subject_id + ".csv"));
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const auto row = trim_cr(line);
      if (row.empty()) continue;
      const auto cells = split(row, ',');
      if (cells.size() != width) {
        throw std::runtime_error(sw.subject_id + ".csv: expected " + std::to_string(width) +
                                 " fields per row");
      }
      PointCloudSample smp;
      smp.subject_id = sw.subject_id;
      smp.first_frame = static_cast<std::size_t>(parse_double(cells[0], "first_frame"));
      const auto label = gesture_from_index(static_cast<long>(parse_double(cells[1], "label")));
      if (!label) throw std::runtime_error(sw.subject_id + ".csv: label index out of range");
      smp.label = *label;
      smp.points = Matrix<double>(rows, kFeaturesPerDevice);
      for (std::size_t i = 0; i < rows * kFeaturesPerDevice; ++i) {
        smp.points.storage()[i] = parse_double(cells[i + 2], "sample");
      }
      sw.windows.push_back(std::move(smp));
    }
    if (sw.windows.size() != s.at("samples").get<std::size_t>()) {
      throw std::runtime_error(sw.subject_id + ".csv: sample count does not match meta.json");
    }
    a.subjects.push_back(std::move(sw));
  }
  return a;
}

}  // namespace wip
