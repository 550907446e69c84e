#pragma once

// File formats: per-subject recording CSV and the windowed dataset archive.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "wip/dataset.hpp"
#include "wip/synthgen.hpp"

namespace wip {

namespace fs = std::filesystem;

// Writes `bytes` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const fs::path& path, const std::string& bytes);
std::string read_file(const fs::path& path);

// Recording CSV:
//   # subject_id=S1,standing_head_height=...,... (profile line)
//   timestamp,hmd_pos_x,...,right_avel_z,label
//   one row per frame, 17 significant digits.
std::string recording_to_csv(const SubjectRecording& rec);
SubjectRecording recording_from_csv(const std::string& text);
void write_recording(const fs::path& path, const SubjectRecording& rec);
SubjectRecording read_recording(const fs::path& path);

// *.csv files of a directory in natural order (S2 before S10).
std::vector<fs::path> list_recordings(const fs::path& dir);
std::vector<SubjectRecording> load_recordings(const fs::path& dir);

bool natural_less(const std::string& a, const std::string& b);

nlohmann::json to_json(const WindowConfig& cfg);
WindowConfig window_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NormalizationStats& s);
NormalizationStats norm_stats_from_json(const nlohmann::json& j);
nlohmann::json label_vocabulary();
// Throws unless `j` lists the nine labels in the fixed order.
void check_label_vocabulary(const nlohmann::json& j);

// Dataset archive directory:
//   stats.json  per-channel min/max over every archived sample
//   meta.json   window config, label vocabulary, subject list
//   <subject>.csv  one row per window: first_frame, label index, then the
//                  points x 12 raw features row-major
struct DatasetArchive {
  WindowConfig window;
  NormalizationStats stats;
  std::vector<SubjectWindows> subjects;
};

void write_dataset_archive(const fs::path& dir, const DatasetArchive& archive);
DatasetArchive read_dataset_archive(const fs::path& dir);
bool is_dataset_archive(const fs::path& dir);

}  // namespace wip
