#include <doctest.h>

#include <sstream>

#include "bogss/diarization.hpp"
#include "test_util.hpp"

using namespace bogss;
using namespace bogss::test;

namespace {

SegmentList parse(const std::string& text) {
  std::istringstream in(text);
  return parse_segments(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("parsing segment lines") {
  const auto one = parse("alice 0.0 1.5\n");
  REQUIRE(one.size() == 1);
  CHECK(one[0] == Segment{"alice", 0.0, 1.5});
  CHECK(parse("").empty());
  CHECK(parse("\n   \n# only a comment\n").empty());

  const auto mixed = parse("# header\r\nalice 0 1 # trailing\r\n\r\nbob\t2.5\t3.25\r\n");
  REQUIRE(mixed.size() == 2);
  CHECK(mixed[1] == Segment{"bob", 2.5, 3.25});

  CHECK(error_of("bob 2.0 1.0").find("line 1") != std::string::npos);
  CHECK(error_of("a 0 1\n\nbob 2.0 2.0\n").find("line 3") != std::string::npos);
  CHECK(error_of("a 0 1\nb 0\n").find("line 2") != std::string::npos);
  CHECK(error_of("a 0 1 2\n").find("line 1") != std::string::npos);
  CHECK(error_of("a x 1\n").find("line 1") != std::string::npos);
  CHECK(error_of("a -1 1\n").find("line 1") != std::string::npos);
  CHECK_THROWS_AS(parse_segments_file("/nonexistent/segments.txt"), Error);
}

TEST_CASE("writing and parsing round trip") {
  Rng rng(50);
  SegmentList segs;
  for (int i = 0; i < 50; ++i) {
    const double s = uniform(rng, 0, 100);
    segs.push_back({"spk" + std::to_string(i % 4), s, s + uniform(rng, 0.01, 5)});
  }
  std::ostringstream out;
  write_segments(out, segs);
  CHECK(parse(out.str()) == segs);
}

TEST_CASE("segment to frame conversion") {
  const StftConfig stft;
  const auto a = segments_to_activities({{"alice", 0.0, 1.0}}, stft, 100);
  REQUIRE(a.num_sources() == 2);
  CHECK(a.label(1) == "alice");
  for (std::size_t t = 0; t < 100; ++t) CHECK(a(t, 1) == (t <= 62));
  CHECK(a.active_frames(1) == 63);

  const auto none = segments_to_activities({}, stft, 30);
  CHECK(none.num_sources() == 1);
  CHECK(none.active_frames(0) == 30);

  const auto twice = segments_to_activities({{"a", 0.0, 1.0}, {"a", 0.5, 1.5}}, stft, 200);
  CHECK(twice.num_sources() == 2);
  const auto single = segments_to_activities({{"a", 0.0, 1.5}}, stft, 200);
  CHECK(twice == single);

  const auto order = segments_to_activities({{"b", 3, 4}, {"a", 0, 1}, {"b", 5, 6}}, stft, 500);
  CHECK(order.num_sources() == 3);
  CHECK(order.index_of("b") == 1);
  CHECK(order.index_of("a") == 2);
  CHECK(order.index_of("c") == ActivityMatrix::npos);
  CHECK(order.index_of("noise") == ActivityMatrix::npos);
}

TEST_CASE("activity matrix editing") {
  ActivityMatrix a(5, 2);
  CHECK_THROWS_AS(a.set(0, 0, false), Error);
  a.set(2, 1, true);
  a.widen(4);
  CHECK(a.num_sources() == 4);
  CHECK(a(2, 1));
  CHECK_FALSE(a(2, 3));
  CHECK(a(4, 0));
  a.widen(2);
  CHECK(a.num_sources() == 4);
  const auto s = a.slice(2, 4);
  CHECK(s.num_frames() == 2);
  CHECK(s(0, 1));
  CHECK_FALSE(s(1, 1));
  CHECK_THROWS_AS(a.slice(3, 6), Error);
  CHECK_THROWS_AS(ActivityMatrix(3, 0), Error);
}

TEST_CASE("activity runs match a run-length oracle") {
  Rng rng(51);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t frames = uniform_index(rng, 0, 60), sources = uniform_index(rng, 1, 5);
    const auto a = random_activities(rng, frames, sources, uniform(rng, 0.1, 0.9));
    std::vector<ActivityRun> want;
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t k = 1; k < sources; ++k)
        if (a(t, k) && (t == 0 || !a(t - 1, k))) {
          std::size_t e = t;
          while (e + 1 < frames && a(e + 1, k)) ++e;
          want.push_back({k, t, e});
        }
    CHECK(activity_runs(a) == want);

    std::size_t covered = 0;
    for (const auto& r : want) covered += r.last_frame - r.first_frame + 1;
    std::size_t total = 0;
    for (std::size_t k = 1; k < sources; ++k) total += a.active_frames(k);
    CHECK(covered == total);
  }
}

TEST_CASE("activities convert back to segments") {
  const StftConfig stft;
  const SegmentList segs{{"a", 0.0, 1.0}, {"b", 0.5, 2.0}, {"a", 3.0, 3.5}};
  const auto act = segments_to_activities(segs, stft, 300);
  const auto back = activities_to_segments(act, stft);
  REQUIRE(back.size() == 3);
  CHECK(back[0].speaker == "a");
  CHECK(back[0].start_sec == 0.0);
  CHECK(back[0].end_sec == doctest::Approx(63 * 0.016));
  CHECK(back[1].speaker == "b");
  CHECK(back[2].start_sec == doctest::Approx(188 * 0.016));
  CHECK(segments_to_activities(back, stft, 300) == act);
}
