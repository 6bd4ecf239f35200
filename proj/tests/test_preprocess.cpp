#include <cmath>
#include <random>

#include "doctest.h"
#include "gaitwave/errors.hpp"
#include "gaitwave/preprocess.hpp"

using namespace gaitwave;

namespace {

Window random_window(int64_t len, int64_t c, uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Window w;
  w.samples = Array2D<double>(len, c);
  for (auto& v : w.samples.values()) v = n(rng);
  w.label = 4;
  w.source_session = "sess";
  w.start_index = 17;
  return w;
}

CsiRecording constant_recording(int64_t t, int64_t c, float value, std::optional<int> label = std::nullopt) {
  CsiRecording r;
  r.samples = Array2D<float>(t, c, value);
  r.rate_hz = 10.0;
  r.session_id = "bg";
  r.person_label = label;
  return r;
}

}  // namespace

TEST_CASE("background profile") {
  auto bg = compute_background(constant_recording(40, 3, 2.0f));
  for (double v : bg.mean_amplitude) CHECK(v == 2.0);

  auto two = constant_recording(2, 1, 1.0f);
  two.samples(1, 0) = 3.0f;
  CHECK(compute_background(two).mean_amplitude[0] == 2.0);
  CHECK(compute_background(two, BackgroundStatistic::median).mean_amplitude[0] == 2.0);

  auto odd = constant_recording(3, 1, 1.0f);
  odd.samples(1, 0) = 100.0f;
  CHECK(compute_background(odd, BackgroundStatistic::median).mean_amplitude[0] == 1.0);

  CHECK_THROWS_AS(compute_background(constant_recording(4, 1, 1.0f, 2)), MisuseError);
}

TEST_CASE("background subtraction") {
  BackgroundProfile bg{{1.5, -2.0, 0.25}, Band::sub6, "bg"};
  Window w;
  w.samples = Array2D<double>(4, 3);
  for (int t = 0; t < 4; ++t)
    for (int c = 0; c < 3; ++c) w.samples(t, c) = bg.mean_amplitude[static_cast<size_t>(c)];
  auto zero = subtract_background(w, bg);
  for (double v : zero.samples.values()) CHECK(v == 0.0);

  auto x = random_window(10, 3, 1);
  auto y = subtract_background(x, BackgroundProfile{{0.0, 0.0, 0.0}, Band::sub6, ""});
  CHECK(y.samples == x.samples);

  auto z = subtract_background(x, bg);
  CHECK(z.label == x.label);
  CHECK(z.start_index == x.start_index);
  for (int64_t t = 0; t < 10; ++t)
    for (int c = 0; c < 3; ++c) {
      const double restored = z.samples(t, c) + bg.mean_amplitude[static_cast<size_t>(c)];
      CHECK(std::abs(restored - x.samples(t, c)) <= 4 * std::numeric_limits<double>::epsilon() *
                                                        std::max(1.0, std::abs(x.samples(t, c))));
    }

  CHECK_THROWS_AS(subtract_background(random_window(5, 2, 1), bg), DimensionError);
}

TEST_CASE("gaussian kernel properties") {
  for (int k : {1, 3, 5, 7, 11, 21})
    for (double sigma : {0.3, 1.0, 2.5, 10.0}) {
      auto g = gaussian_kernel(k, sigma);
      double s = 0;
      for (size_t i = 0; i < g.size(); ++i) {
        REQUIRE(g[i] > 0.0);
        REQUIRE(g[i] == g[g.size() - 1 - i]);
        s += g[i];
      }
      REQUIRE(std::abs(s - 1.0) < 1e-9);
    }
  CHECK_THROWS_AS(gaussian_kernel(4, 1.0), ParameterError);
  CHECK_THROWS_AS(gaussian_kernel(3, 0.0), ParameterError);
}

TEST_CASE("gaussian smoothing") {
  std::mt19937_64 rng(3);
  SmoothingParams always{5, 1.0, 1.0};

  SUBCASE("constant window unchanged") {
    Window w;
    w.samples = Array2D<double>(12, 2, 7.25);
    auto out = gaussian_smooth(w, SmoothingParams{7, 2.0, 1.0}, rng);
    for (double v : out.samples.values()) CHECK(std::abs(v - 7.25) < 1e-12);
  }
  SUBCASE("impulse reproduces the kernel") {
    Window w;
    w.samples = Array2D<double>(11, 1, 0.0);
    w.samples(5, 0) = 1.0;
    auto out = gaussian_smooth(w, always, rng);
    double z = 0;
    for (int i = -2; i <= 2; ++i) z += std::exp(-i * i / 2.0);
    for (int i = -2; i <= 2; ++i) CHECK(out.samples(5 + i, 0) == doctest::Approx(std::exp(-i * i / 2.0) / z));
    CHECK(out.samples(0, 0) == 0.0);
  }
  SUBCASE("reflect padding at the boundary") {
    Window w;
    w.samples = Array2D<double>(4, 1, 0.0);
    w.samples(1, 0) = 1.0;
    auto out = gaussian_smooth(w, SmoothingParams{3, 1.0, 1.0}, rng);
    // Output at t=0 sees x[-1] = x[1] and x[1]: two of the three taps hit the impulse.
    const double e = std::exp(-0.5), z = 1 + 2 * e;
    CHECK(out.samples(0, 0) == doctest::Approx(2 * e / z));
  }
  SUBCASE("probability gate") {
    auto w = random_window(20, 3, 2);
    auto out = gaussian_smooth(w, SmoothingParams{5, 1.0, 0.0}, rng);
    CHECK(out.samples == w.samples);
    auto smoothed = gaussian_smooth(w, always, rng);
    CHECK(smoothed.samples.rows() == 20);
    CHECK(smoothed.label == w.label);
    CHECK_FALSE(smoothed.samples == w.samples);
  }
  SUBCASE("invalid parameters") {
    auto w = random_window(4, 1, 2);
    CHECK_THROWS_AS(gaussian_smooth(w, SmoothingParams{5, 1.0, 1.0}, rng), ParameterError);
    CHECK_THROWS_AS(gaussian_smooth(w, SmoothingParams{2, 1.0, 1.0}, rng), ParameterError);
  }
  SUBCASE("same seed, same decisions") {
    auto w = random_window(20, 3, 2);
    std::mt19937_64 a(9), b(9);
    SmoothingParams half{5, 1.0, 0.5};
    for (int i = 0; i < 20; ++i) REQUIRE(gaussian_smooth(w, half, a).samples == gaussian_smooth(w, half, b).samples);
  }
}

TEST_CASE("mixup") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  nn::Tensor x({6, 4, 2});
  for (auto& v : x.values()) v = n(rng);
  nn::Tensor y({6, 3}, 0.0);
  for (int i = 0; i < 6; ++i) y[i * 3 + i % 3] = 1.0;
  MixupParams params;

  SUBCASE("lambda one is the identity") {
    auto m = mixup_batch(x, y, params, rng, 1.0);
    CHECK(m.x.values() == x.values());
    CHECK(m.y.values() == y.values());
  }
  SUBCASE("lambda one half averages pairs") {
    auto m = mixup_batch(x, y, params, rng, 0.5);
    for (int i = 0; i < 6; ++i) {
      const auto p = m.partner[static_cast<size_t>(i)];
      for (int k = 0; k < 8; ++k) CHECK(m.x[i * 8 + k] == doctest::Approx(0.5 * (x[i * 8 + k] + x[p * 8 + k])));
      if (i % 3 != p % 3) {
        CHECK(m.y[i * 3 + i % 3] == 0.5);
        CHECK(m.y[i * 3 + p % 3] == 0.5);
      }
    }
  }
  SUBCASE("sampled lambda keeps convexity and label sums") {
    for (int trial = 0; trial < 50; ++trial) {
      auto m = mixup_batch(x, y, params, rng);
      REQUIRE(m.lambda >= 0.0);
      REQUIRE(m.lambda <= 1.0);
      for (int i = 0; i < 6; ++i) {
        const auto p = m.partner[static_cast<size_t>(i)];
        double s = 0;
        for (int k = 0; k < 3; ++k) {
          REQUIRE(m.y[i * 3 + k] >= 0.0);
          s += m.y[i * 3 + k];
        }
        REQUIRE(std::abs(s - 1.0) < 1e-9);
        for (int k = 0; k < 8; ++k) {
          const double lo = std::min(x[i * 8 + k], x[p * 8 + k]), hi = std::max(x[i * 8 + k], x[p * 8 + k]);
          REQUIRE(m.x[i * 8 + k] >= lo - 1e-12);
          REQUIRE(m.x[i * 8 + k] <= hi + 1e-12);
        }
      }
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(mixup_batch(x, y, MixupParams{0.0, true}, rng), ParameterError);
    CHECK_THROWS_AS(mixup_batch(nn::Tensor({1, 4, 2}), nn::Tensor({1, 3}), params, rng), MisuseError);
  }
}

TEST_CASE("standardization") {
  std::vector<Window> train;
  for (int i = 0; i < 8; ++i) {
    auto w = random_window(30, 4, static_cast<uint64_t>(i), 3.0);
    for (int64_t t = 0; t < 30; ++t) w.samples(t, 1) += 50.0;
    train.push_back(w);
  }
  const auto stats = channel_stats(train);
  std::vector<Window> out;
  for (const auto& w : train) out.push_back(standardize(w, stats));
  const auto after = channel_stats(out);
  for (int c = 0; c < 4; ++c) {
    CHECK(std::abs(after.mean[static_cast<size_t>(c)]) < 1e-5);
    CHECK(std::abs(after.std[static_cast<size_t>(c)] - 1.0) < 1e-5);
  }

  Window mean_window;
  mean_window.samples = Array2D<double>(3, 4);
  for (int t = 0; t < 3; ++t)
    for (int c = 0; c < 4; ++c) mean_window.samples(t, c) = stats.mean[static_cast<size_t>(c)];
  const auto centred = standardize(mean_window, stats);
  for (double v : centred.samples.values()) CHECK(v == 0.0);

  ChannelStats unit{{0, 0, 0, 0}, {1, 1, 1, 1}};
  CHECK(standardize(train[0], unit).samples == train[0].samples);

  ChannelStats degenerate{{0, 0, 0, 0}, {0, 0, 0, 0}};
  auto big = standardize(train[0], degenerate);
  CHECK(std::isfinite(big.samples(0, 0)));
}
