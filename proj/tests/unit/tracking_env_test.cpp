#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "dan/errors.hpp"
#include "dan/tracking_env.hpp"

namespace dan {
namespace {

GridConfig quiet_grid() {
  GridConfig g;
  g.noise_adjacent = 0.0;
  g.miss_prob = 0.0;
  return g;
}

TEST(GridConfigTest, Validation) {
  GridConfig g;
  EXPECT_NO_THROW(g.validate());
  g.width = 1;
  EXPECT_THROW(g.validate(), ValidationError);
  g = GridConfig{};
  g.miss_prob = 1.5;
  EXPECT_THROW(g.validate(), ValidationError);
  g = GridConfig{};
  g.episode_len = 0;
  EXPECT_THROW(g.validate(), ValidationError);
}

TEST(Layout, DefaultTilesOverlapAndLeaveBlindSpots) {
  const GridConfig g;
  const auto cams = default_camera_layout(g);
  ASSERT_EQ(cams.size(), 4u);
  EXPECT_EQ(cams[0], (CameraSpec{0, 1, 1, 5, 5}));
  EXPECT_EQ(cams[3], (CameraSpec{3, 4, 4, 8, 8}));
  int covered = 0;
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      bool any = false;
      for (const auto& c : cams) any = any || c.covers({x, y});
      covered += any;
    }
  EXPECT_EQ(covered, 64);
}

TEST(Layout, RejectsOutOfGridRectangles) {
  const GridConfig g;
  const std::vector<CameraSpec> bad{{0, 0, 0, 10, 3}};
  EXPECT_THROW(validate_layout(g, bad), ValidationError);
  const std::vector<CameraSpec> misnumbered{{1, 0, 0, 3, 3}};
  EXPECT_THROW(validate_layout(g, misnumbered), ValidationError);
}

TEST(Layout, JsonRoundTrip) {
  const GridConfig g;
  const auto cams = default_camera_layout(g);
  const auto l = layout_from_json(layout_to_json(g, cams));
  EXPECT_EQ(l.width, 10);
  EXPECT_EQ(l.cameras, cams);
}

TEST(Walk, FullPersistenceGoesStraightToTheWall) {
  GridConfig g;
  g.walk_persistence = 1.0;
  Rng rng(1);
  const auto t = walk_track(g, {5, 5}, Move{1, 0}, rng);
  ASSERT_EQ(t.positions.size(), 12u);
  for (std::size_t i = 0; i < t.positions.size(); ++i) {
    EXPECT_EQ(t.positions[i].y, 5);
    EXPECT_EQ(t.positions[i].x, std::min(5 + static_cast<int>(i), 9));
  }
}

TEST(Walk, StepsAreUnitMoves) {
  const GridConfig g;
  const auto ds = generate_dataset(g, default_camera_layout(g), 200, 3);
  for (const auto& t : ds.train)
    for (std::size_t i = 1; i < t.positions.size(); ++i) {
      EXPECT_LE(std::abs(t.positions[i].x - t.positions[i - 1].x), 1);
      EXPECT_LE(std::abs(t.positions[i].y - t.positions[i - 1].y), 1);
    }
}

TEST(Walk, DisplacementMatchesKernel) {
  // Interior steps only, so clipping never applies. The first step has no
  // previous move: uniform over {-1,0,1}. Later steps repeat with
  // probability p, else uniform; the marginal per axis is still uniform.
  GridConfig g;
  g.width = g.height = 200;
  g.walk_persistence = 0.5;
  Rng rng(77);
  std::map<int, int> hist;
  int repeats = 0, pairs = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto t = walk_track(g, {100, 100}, std::nullopt, rng);
    for (std::size_t s = 1; s < t.positions.size(); ++s) {
      const int dx = t.positions[s].x - t.positions[s - 1].x;
      const int dy = t.positions[s].y - t.positions[s - 1].y;
      ++hist[dx];
      if (s >= 2) {
        const int pdx = t.positions[s - 1].x - t.positions[s - 2].x;
        const int pdy = t.positions[s - 1].y - t.positions[s - 2].y;
        repeats += (dx == pdx && dy == pdy);
        ++pairs;
      }
    }
  }
  const double total = 2000.0 * 11.0;
  for (int d = -1; d <= 1; ++d) EXPECT_NEAR(hist[d] / total, 1.0 / 3.0, 0.02);
  // Pr(repeat) = p + (1 - p) / 9.
  EXPECT_NEAR(static_cast<double>(repeats) / pairs, 0.5 + 0.5 / 9.0, 0.02);
}

TEST(Dataset, SplitAndDeterminism) {
  const GridConfig g;
  const auto cams = default_camera_layout(g);
  const auto a = generate_dataset(g, cams, 500, 9);
  const auto b = generate_dataset(g, cams, 500, 9);
  EXPECT_EQ(a.train.size(), 400u);
  EXPECT_EQ(a.test.size(), 100u);
  EXPECT_EQ(tracks_to_jsonl(a.train), tracks_to_jsonl(b.train));
  EXPECT_EQ(tracks_to_jsonl(a.test), tracks_to_jsonl(b.test));
  EXPECT_NE(tracks_to_jsonl(a.train), tracks_to_jsonl(generate_dataset(g, cams, 500, 10).train));
  EXPECT_THROW(generate_dataset(g, cams, 1, 9), ValidationError);
}

TEST(Dataset, JsonlRoundTrip) {
  const GridConfig g;
  const auto ds = generate_dataset(g, default_camera_layout(g), 20, 2);
  const auto text = tracks_to_jsonl(ds.train);
  EXPECT_EQ(tracks_from_jsonl(text), ds.train);
  EXPECT_NE(text.find("\"track_id\""), std::string::npos);
  EXPECT_THROW(tracks_from_jsonl("{\"track_id\": 0}\n"), ValidationError);
}

TEST(Observe, OutsideCoverageIsNull) {
  const GridConfig g;
  const CameraSpec cam{0, 3, 3, 6, 6};
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(observe(g, cam, {0, 0}, rng).is_null());
}

TEST(Observe, NoiseFreeReadingIsExact) {
  const auto g = quiet_grid();
  const CameraSpec cam{0, 3, 3, 6, 6};
  Rng rng(1);
  const auto o = observe(g, cam, {4, 5}, rng);
  ASSERT_FALSE(o.is_null());
  EXPECT_EQ(*o.reading_x, 4);
  EXPECT_EQ(*o.reading_y, 5);
}

TEST(Observe, DisplacementRate) {
  GridConfig g;
  g.noise_adjacent = 0.2;
  g.miss_prob = 0.0;
  const CameraSpec cam{0, 0, 0, 9, 9};
  Rng rng(12);
  int displaced = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto o = observe(g, cam, {5, 5}, rng);
    displaced += (*o.reading_x != 5 || *o.reading_y != 5);
    EXPECT_TRUE(cam.covers({*o.reading_x, *o.reading_y}));
  }
  EXPECT_NEAR(displaced / 10000.0, 0.2, 0.015);
}

TEST(Observe, ReadingsStayInsideTheCamera) {
  GridConfig g;
  g.noise_adjacent = 1.0;
  g.miss_prob = 0.0;
  const CameraSpec cam{0, 2, 2, 4, 4};
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto o = observe(g, cam, {2, 2}, rng);
    EXPECT_TRUE(cam.covers({*o.reading_x, *o.reading_y}));
  }
}

TEST(Episode, StepsThenEnds) {
  const auto g = quiet_grid();
  const auto cams = default_camera_layout(g);
  Rng rng(1);
  auto track = walk_track(g, {3, 3}, std::nullopt, rng);
  TrackingEpisode ep(g, cams, track, Rng(2));
  for (int t = 0; t < g.episode_len; ++t) {
    const auto st = ep.step(0);
    EXPECT_EQ(st.truth, track.positions[static_cast<std::size_t>(t)]);
    if (!st.obs.is_null()) {
      EXPECT_EQ(*st.obs.reading_x, st.truth.x);
      EXPECT_TRUE(cams[0].covers(st.truth));
    }
  }
  EXPECT_TRUE(ep.done());
  EXPECT_THROW(ep.step(0), StateError);
}

TEST(MultiPerson, SinglePersonMatchesEpisode) {
  const GridConfig g;
  const auto cams = default_camera_layout(g);
  const auto ds = generate_dataset(g, cams, 10, 4);
  TrackingEpisode single(g, cams, ds.train[0], Rng(5));
  MultiPersonEpisode multi(g, cams, {ds.train[0]}, Rng(5));
  for (int t = 0; t < g.episode_len; ++t) {
    const std::size_t cam = static_cast<std::size_t>(t) % cams.size();
    const auto a = single.step(cam);
    const auto b = multi.step(cam);
    EXPECT_EQ(a.truth, b.truth[0]);
    EXPECT_EQ(a.obs.reading_x, b.obs[0].reading_x);
    EXPECT_EQ(a.obs.reading_y, b.obs[0].reading_y);
  }
}

TEST(MultiPerson, SharedCameraSeesOnlyCoveredPeople) {
  const auto g = quiet_grid();
  const std::vector<CameraSpec> cams{{0, 0, 0, 2, 2}};
  auto fixed = [](Cell c) { return Track{0, std::vector<Cell>(12, c)}; };
  MultiPersonEpisode ep(g, cams, {fixed({1, 1}), fixed({5, 5}), fixed({8, 1})}, Rng(1));
  const auto st = ep.step(0);
  EXPECT_FALSE(st.obs[0].is_null());
  EXPECT_TRUE(st.obs[1].is_null());
  EXPECT_TRUE(st.obs[2].is_null());

  MultiPersonEpisode two(g, {{0, 0, 0, 9, 9}}, {fixed({1, 1}), fixed({5, 5})}, Rng(1));
  const auto both = two.step(0);
  EXPECT_EQ(*both.obs[0].reading_x, 1);
  EXPECT_EQ(*both.obs[1].reading_y, 5);
}

TEST(MultiPerson, MismatchedLengthsRejected) {
  const GridConfig g;
  Track a{0, std::vector<Cell>(12, Cell{1, 1})}, b{1, std::vector<Cell>(5, Cell{1, 1})};
  EXPECT_THROW(MultiPersonEpisode(g, default_camera_layout(g), {a, b}, Rng(1)), ValidationError);
  EXPECT_THROW(MultiPersonEpisode(g, default_camera_layout(g), {}, Rng(1)), ValidationError);
}

TEST(FactoredModel, ShapesAndColumns) {
  const GridConfig g;
  const auto cams = default_camera_layout(g);
  const auto m = factored_model(g, cams, Axis::kX);
  EXPECT_EQ(m.transition.rows(), 10);
  EXPECT_EQ(m.transition.cols(), 10);
  EXPECT_EQ(m.n_obs(), 11u);
  EXPECT_EQ(m.n_actions(), 4u);
  for (int c = 0; c < 10; ++c) EXPECT_NEAR(m.transition.col(c).sum(), 1.0, 1e-9);
  EXPECT_NO_THROW(m.validate());
}

TEST(FactoredModel, OutOfCoverageAlwaysNull) {
  const GridConfig g;
  const std::vector<CameraSpec> cams{{0, 3, 0, 6, 9}};
  const auto m = factored_model(g, cams, Axis::kX);
  EXPECT_DOUBLE_EQ(m.observations[0](10, 0), 1.0);
  EXPECT_DOUBLE_EQ(m.observations[0](10, 9), 1.0);
  EXPECT_LT(m.observations[0](10, 4), 1.0);
}

TEST(FactoredModel, FilterNeverLosesTheTrueCell) {
  const GridConfig g;
  const auto cams = default_camera_layout(g);
  const auto mx = factored_model(g, cams, Axis::kX);
  const auto my = factored_model(g, cams, Axis::kY);
  const auto ds = generate_dataset(g, cams, 10000, 8);
  Rng pick(2);
  std::size_t steps = 0;
  for (std::size_t i = 0; steps < 100000; ++i) {
    const auto& track = i < ds.train.size() ? ds.train[i] : ds.test[i - ds.train.size()];
    TrackingEpisode ep(g, cams, track, Rng(derive_seed(8, "ep", i)));
    Belief bx = Belief::uniform(10), by = Belief::uniform(10);
    while (!ep.done()) {
      const std::size_t cam = pick.uniform_int(cams.size());
      const auto st = ep.step(cam);
      bx = bayes_update(bx, cam, encode_reading(st.obs, Axis::kX, g), mx);
      by = bayes_update(by, cam, encode_reading(st.obs, Axis::kY, g), my);
      ASSERT_GT(bx[static_cast<std::size_t>(st.truth.x)], 0.0);
      ASSERT_GT(by[static_cast<std::size_t>(st.truth.y)], 0.0);
      ++steps;
    }
  }
}

TEST(FactoredModel, KernelIsClippedUniformStep) {
  const GridConfig g;
  const auto m = factored_model(g, default_camera_layout(g), Axis::kX);
  EXPECT_DOUBLE_EQ(m.transition(4, 5), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.transition(5, 5), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.transition(7, 5), 0.0);
  EXPECT_DOUBLE_EQ(m.transition(0, 0), 2.0 / 3.0);
  const Belief u = Belief::uniform(10);
  EXPECT_LT(tv_distance(predict(u, m), u), 1e-12);
}

TEST(Encoding, NullIsTheLastSymbol) {
  const GridConfig g;
  EnvObservation obs{0, std::nullopt, std::nullopt};
  EXPECT_EQ(encode_reading(obs, Axis::kX, g), 10u);
  obs.reading_x = 3;
  obs.reading_y = 7;
  EXPECT_EQ(encode_reading(obs, Axis::kX, g), 3u);
  EXPECT_EQ(encode_reading(obs, Axis::kY, g), 7u);
}

TEST(CoverageReward, Modes) {
  EnvObservation seen{0, 2, 3};
  EnvObservation null{0, std::nullopt, std::nullopt};
  EXPECT_EQ(coverage_reward(seen, false, RewardMode::kDanPlusCoverage), 0.2);
  EXPECT_EQ(coverage_reward(null, false, RewardMode::kCoverage), 0.0);
  EXPECT_EQ(coverage_reward(seen, true, RewardMode::kDan), 1.0);
  EXPECT_EQ(coverage_reward(seen, false, RewardMode::kCoverage), 1.0);
  EXPECT_EQ(coverage_reward(null, false, RewardMode::kDanPlusCoverage), 0.0);
  EXPECT_EQ(coverage_reward(null, true, RewardMode::kDanPlusCoverage), 1.0);
}

}  // namespace
}  // namespace dan
