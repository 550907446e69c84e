#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "wip/dataset.hpp"
#include "wip/synthgen.hpp"

using namespace wip;

namespace {

GestureScript one(Gesture g, double seconds) { return GestureScript{{{g, seconds}}}; }

std::vector<double> head_heights(const Recording& r) {
  std::vector<double> h;
  for (const auto& f : r) h.push_back(f.frame.device(Device::Hmd).position[1]);
  return h;
}

std::vector<double> moving_average(const std::vector<double>& x, std::size_t w) {
  std::vector<double> out;
  for (std::size_t i = 0; i + w <= x.size(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < w; ++j) s += x[i + j];
    out.push_back(s / static_cast<double>(w));
  }
  return out;
}

}  // namespace

TEST_CASE("sample_subject is deterministic and in range") {
  CHECK(sample_subject(0) == sample_subject(0));
  CHECK_FALSE(sample_subject(0) == sample_subject(1));
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto p = sample_subject(s);
    REQUIRE(p.standing_head_height >= 1.4);
    REQUIRE(p.standing_head_height <= 2.0);
    REQUIRE(p.amplitude_scale >= 0.5);
    REQUIRE(p.amplitude_scale <= 1.5);
    REQUIRE(p.noise_sigma >= 0.0);
  }
}

TEST_CASE("recordings have 3 devices x 12 features at 30 Hz") {
  const auto r = generate_recording(sample_subject(3), GestureScript::default_script(), 3);
  REQUIRE(r.size() > 2);
  CHECK(r.front().frame.features().size() == 36);
  for (std::size_t i = 1; i < r.size(); ++i) {
    REQUIRE(std::abs(r[i].frame.timestamp - r[i - 1].frame.timestamp - 1.0 / 30.0) < 1e-9);
  }
  for (const auto& f : r) {
    for (double v : f.frame.features()) REQUIRE(std::isfinite(v));
    for (const auto& d : f.frame.devices) {
      for (double a : d.rotation) {
        REQUIRE(a >= -180.0);
        REQUIRE(a < 180.0);
      }
    }
  }
}

TEST_CASE("2 s standing: 60 frames within 3 sigma of standing height") {
  const auto p = sample_subject(5);
  const auto r = generate_recording(p, one(Gesture::Standing, 2.0), 9);
  CHECK(r.size() == 60);
  for (double h : head_heights(r)) {
    CHECK(std::abs(h - p.standing_head_height) <= 3 * p.noise_sigma + 1e-12);
  }
}

TEST_CASE("2 s walking: head height has at least 2 local maxima") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto r = generate_recording(sample_subject(s), one(Gesture::Walking, 2.0), s);
    const auto h = moving_average(head_heights(r), 3);
    int maxima = 0;
    for (std::size_t i = 1; i + 1 < h.size(); ++i) maxima += h[i] > h[i - 1] && h[i] >= h[i + 1];
    CHECK(maxima >= 2);
  }
}

TEST_CASE("squat-down: smoothed head height is non-increasing") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto r = generate_recording(sample_subject(s), one(Gesture::SquatDown, 1.0), s);
    const auto h = moving_average(head_heights(r), 5);
    for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1]);
  }
}

TEST_CASE("angular velocity is the discrete derivative of rotation") {
  const auto r = generate_recording(sample_subject(2), GestureScript::default_script(), 2);
  for (std::size_t i = 1; i < r.size(); ++i) {
    for (std::size_t d = 0; d < kNumDevices; ++d) {
      for (int a = 0; a < 3; ++a) {
        const double drot = wrap_degrees(r[i].frame.devices[d].rotation[a] -
                                         r[i - 1].frame.devices[d].rotation[a]);
        REQUIRE(r[i].frame.devices[d].angular_velocity[a] == doctest::Approx(drot * 30.0).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("generate_dataset: 14 subjects, deterministic, rejects one subject") {
  const auto script = GestureScript::default_script();
  const auto a = generate_dataset(14, script, 42);
  CHECK(a.size() == 14);
  std::set<std::string> ids;
  for (const auto& r : a) ids.insert(r.profile.subject_id);
  CHECK(ids.size() == 14);
  CHECK(a.front().profile.subject_id == "S1");
  const auto b = generate_dataset(3, script, 42);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i].profile == b[i].profile);
    REQUIRE(a[i].frames.size() == b[i].frames.size());
    CHECK(a[i].frames.back().frame.features() == b[i].frames.back().frame.features());
  }
  CHECK_THROWS_AS(generate_dataset(1, script, 42), std::invalid_argument);
}

TEST_CASE("default script: standing is about 31.7% of windows, every class present") {
  const auto r = generate_recording(sample_subject(1), GestureScript::default_script(), 1);
  const auto w = segment_windows(r, WindowConfig{});
  std::array<int, kNumGestures> counts{};
  for (const auto& s : w) ++counts[index_of(s.label)];
  for (int c : counts) CHECK(c > 0);
  const double standing = static_cast<double>(counts[0]) / static_cast<double>(w.size());
  CHECK(standing == doctest::Approx(31790.0 / 100406.0).epsilon(0.05));
  CHECK(*std::max_element(counts.begin(), counts.end()) == counts[0]);
  CHECK(*std::min_element(counts.begin(), counts.end()) == counts[index_of(Gesture::SquatKeep)]);
}

TEST_CASE("script validation and text round trip") {
  CHECK_THROWS_AS(generate_recording(sample_subject(0), GestureScript{}, 0), std::invalid_argument);
  CHECK_THROWS_AS(generate_recording(sample_subject(0), one(Gesture::Walking, 0.0), 0),
                  std::invalid_argument);
  CHECK_THROWS(GestureScript::parse("flying 2.0\n"));
  const auto s = GestureScript::parse("# warmup\nstanding 1.5\nwalking 2\n");
  REQUIRE(s.segments.size() == 2);
  CHECK(s.segments[1].gesture == Gesture::Walking);
  CHECK(s.total_duration() == doctest::Approx(3.5));
  const auto back = GestureScript::parse(GestureScript::default_script().to_text());
  CHECK(back.segments.size() == GestureScript::default_script().segments.size());
}

TEST_CASE("wrap_degrees maps into [-180, 180)") {
  CHECK(wrap_degrees(180.0) == -180.0);
  CHECK(wrap_degrees(-180.0) == -180.0);
  CHECK(wrap_degrees(190.0) == doctest::Approx(-170.0));
  CHECK(wrap_degrees(-190.0) == doctest::Approx(170.0));
  CHECK(wrap_degrees(720.0) == 0.0);
}
