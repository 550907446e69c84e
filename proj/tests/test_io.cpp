#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "wip/hash.hpp"
#include "wip/io.hpp"

using namespace wip;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wip_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("sha256 matches the FIPS 180-2 test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const auto dir = scratch("hash");
  write_file_atomic(dir / "x", "abc");
  CHECK(sha256_file(dir / "x") == sha256_hex("abc"));
  CHECK_THROWS(sha256_file(dir / "missing"));
}

TEST_CASE("recording CSV round trip is exact") {
  const auto rec = generate_dataset(2, GestureScript::default_script(), 5)[1];
  const auto back = recording_from_csv(recording_to_csv(rec));
  CHECK(back.profile.subject_id == rec.profile.subject_id);
  CHECK(back.profile.standing_head_height == rec.profile.standing_head_height);
  REQUIRE(back.frames.size() == rec.frames.size());
  for (std::size_t i = 0; i < rec.frames.size(); ++i) {
    REQUIRE(back.frames[i].label == rec.frames[i].label);
    REQUIRE(back.frames[i].frame.timestamp == rec.frames[i].frame.timestamp);
    REQUIRE(back.frames[i].frame.features() == rec.frames[i].frame.features());
  }
}

TEST_CASE("recording CSV rejects malformed input") {
  const auto rec = generate_dataset(2, GestureScript{{{Gesture::Walking, 1}}}, 5)[0];
  std::string csv = recording_to_csv(rec);
  CHECK_THROWS(recording_from_csv(""));
  std::string bad_label = csv;
  bad_label.replace(bad_label.rfind("walking"), 7, "flying");
  CHECK_THROWS(recording_from_csv(bad_label));
  std::string short_row = csv.substr(0, csv.size() - 20) + "\n";
  CHECK_THROWS(recording_from_csv(short_row));
}

TEST_CASE("files: atomic write, natural ordering, load_recordings") {
  const auto dir = scratch("rec");
  const auto recs = generate_dataset(11, GestureScript{{{Gesture::Standing, 1}}}, 2);
  for (const auto& r : recs) write_recording(dir / (r.profile.subject_id + ".csv"), r);
  write_file_atomic(dir / "notes.txt", "ignored");
  const auto files = list_recordings(dir);
  REQUIRE(files.size() == 11);
  CHECK(files[1].filename() == "S2.csv");
  CHECK(files[10].filename() == "S11.csv");
  const auto loaded = load_recordings(dir);
  CHECK(loaded[9].profile.subject_id == "S10");
  CHECK(natural_less("S2", "S10"));
  CHECK_FALSE(natural_less("S10", "S2"));
  CHECK(natural_less("a", "b"));
  CHECK_THROWS(read_file(dir / "nope.csv"));
  CHECK_THROWS(load_recordings(dir / "nope"));
}

TEST_CASE("dataset archive round trip") {
  const auto dir = scratch("archive");
  const auto recs = generate_dataset(3, GestureScript{{{Gesture::Standing, 1}, {Gesture::Jumping, 1}}}, 6);
  DatasetArchive a;
  a.subjects = segment_subjects(recs, a.window);
  std::vector<PointCloudSample> all;
  for (const auto& s : a.subjects) all.insert(all.end(), s.windows.begin(), s.windows.end());
  a.stats = compute_norm_stats(all);
  CHECK_FALSE(is_dataset_archive(dir / "out"));
  write_dataset_archive(dir / "out", a);
  CHECK(is_dataset_archive(dir / "out"));
  const auto b = read_dataset_archive(dir / "out");
  CHECK(b.window == a.window);
  CHECK(b.stats == a.stats);
  REQUIRE(b.subjects.size() == 3);
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(b.subjects[s].subject_id == a.subjects[s].subject_id);
    REQUIRE(b.subjects[s].windows.size() == a.subjects[s].windows.size());
    for (std::size_t i = 0; i < a.subjects[s].windows.size(); ++i) {
      REQUIRE(b.subjects[s].windows[i].points == a.subjects[s].windows[i].points);
      REQUIRE(b.subjects[s].windows[i].label == a.subjects[s].windows[i].label);
      REQUIRE(b.subjects[s].windows[i].first_frame == a.subjects[s].windows[i].first_frame);
    }
  }
}

TEST_CASE("json helpers round trip and check the label vocabulary") {
  WindowConfig w;
  w.window_frames = 10;
  w.step_frames = 5;
  CHECK(window_config_from_json(to_json(w)) == w);
  NormalizationStats st;
  for (std::size_t c = 0; c < kFeaturesPerDevice; ++c) {
    st.min[c] = -1.0 / 3.0 * static_cast<double>(c);
    st.max[c] = 1.0 + static_cast<double>(c);
  }
  CHECK(norm_stats_from_json(to_json(st)) == st);
  CHECK_NOTHROW(check_label_vocabulary(label_vocabulary()));
  auto bad = label_vocabulary();
  bad[0] = "idle";
  CHECK_THROWS(check_label_vocabulary(bad));
}
