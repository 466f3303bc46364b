#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "hpf/replay/replay.hpp"

using namespace hpf;
using namespace hpf::replay;

namespace {

const EpisodeShape kShape{2, 3, 2, 1};

EpisodeRecord episode(int length, float tag, bool truncated = false) {
  EpisodeRecord e(kShape);
  const std::vector<std::uint8_t> avail(6, 1);
  e.begin(std::vector<float>{tag, 0, 0, 0}, std::vector<float>{tag}, avail);
  for (int t = 0; t < length; ++t) {
    const bool last = t + 1 == length;
    const float v = tag + static_cast<float>(t + 1);
    e.add(std::vector<int>{t % 3, (t + 1) % 3}, v, last && !truncated, t % 2, std::vector<float>{v, v, v, v},
          std::vector<float>{v}, avail);
  }
  e.truncated = truncated;
  return e;
}

}  // namespace

TEST_CASE("FIFO eviction") {
  ReplayBuffer buf(2);
  buf.push_episode(episode(1, 10));
  CHECK(buf.size() == 1);
  buf.push_episode(episode(1, 20));
  CHECK(buf.size() == 2);
  buf.push_episode(episode(1, 30));
  CHECK(buf.size() == 2);
  CHECK(buf.at(0).states[0] == 20.0f);
  CHECK(buf.at(1).states[0] == 30.0f);
  CHECK(buf.inserted() == 3);
}

TEST_CASE("storage fidelity") {
  ReplayBuffer buf(4);
  const EpisodeRecord e = episode(3, 1, true);
  buf.push_episode(e);
  const EpisodeRecord& got = buf.at(0);
  CHECK(got.observations == e.observations);
  CHECK(got.states == e.states);
  CHECK(got.actions == e.actions);
  CHECK(got.rewards == e.rewards);
  CHECK(got.terminated == e.terminated);
  CHECK(got.selection == e.selection);
  CHECK(got.truncated);
}

TEST_CASE("malformed episodes are rejected") {
  ReplayBuffer buf(4);
  CHECK_THROWS_AS(buf.push_episode(EpisodeRecord(kShape)), std::invalid_argument);
  EpisodeRecord no_end = episode(2, 0);
  no_end.terminated.back() = 0;
  CHECK_THROWS_AS(buf.push_episode(no_end), std::invalid_argument);
  EpisodeRecord both = episode(2, 0);
  both.truncated = true;
  CHECK_THROWS_AS(buf.push_episode(both), std::invalid_argument);
  EpisodeRecord e(kShape);
  CHECK_THROWS_AS(e.begin(std::vector<float>{1}, std::vector<float>{1}, std::vector<std::uint8_t>(6, 1)),
                  std::invalid_argument);
}

TEST_CASE("batch padding and masks") {
  ReplayBuffer buf(8);
  buf.push_episode(episode(2, 0));
  buf.push_episode(episode(5, 100));
  const std::vector<int> idx{0, 1};
  const EpisodeBatch b = buf.make_batch(idx);
  CHECK(b.max_length == 5);
  CHECK(b.mask == std::vector<float>{1, 1, 1, 1, 0, 1, 0, 1, 0, 1});
  CHECK(b.terminated[1 * 2 + 0] == 1.0f);
  CHECK(b.terminated[4 * 2 + 1] == 1.0f);
  CHECK(b.rewards[1 * 2 + 0] == 2.0f);
  CHECK(b.rewards[3 * 2 + 0] == 0.0f);
  CHECK(b.selection[3 * 2 + 0] == -1);
  CHECK(b.states.size() == 6 * 2);
  CHECK(b.states[2 * 2 + 0] == 2.0f);   // bootstrap state of the short episode
  CHECK(b.states[3 * 2 + 0] == 0.0f);   // padding
  CHECK(b.observations[(5 * 2 + 1) * 4] == 105.0f);

  // Padding never moves a masked mean.
  const std::vector<float> vals{1, 2, 3, 4, 99, 5, 99, 6, 99, 7};
  const std::vector<float> compact{1, 2, 3, 4, 5, 6, 7};
  CHECK(masked_mean(vals, b.mask) == doctest::Approx(masked_mean(compact, std::vector<float>(7, 1.0f))));
  CHECK(masked_mean(vals, std::vector<float>(10, 0.0f)) == 0.0);
}

TEST_CASE("sampling") {
  ReplayBuffer buf(10);
  Rng rng(9);
  CHECK_FALSE(buf.sample_batch(1, rng).has_value());
  for (int i = 0; i < 10; ++i) buf.push_episode(episode(1, static_cast<float>(i)));

  auto whole = buf.sample_indices(10, rng);
  std::sort(whole.begin(), whole.end());
  for (int i = 0; i < 10; ++i) CHECK(whole[static_cast<std::size_t>(i)] == i);

  const int draws = 10000;
  std::vector<int> counts(10, 0);
  for (int d = 0; d < draws; ++d) {
    const auto idx = buf.sample_indices(3, rng);
    CHECK(idx[0] != idx[1]);
    CHECK(idx[1] != idx[2]);
    CHECK(idx[0] != idx[2]);
    for (int i : idx) ++counts[static_cast<std::size_t>(i)];
  }
  const double n = 3.0 * draws, p = 0.1, sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - n * p) <= 3 * sigma);

  Rng a(5), b(5);
  CHECK(buf.sample_batch(4, a)->states == buf.sample_batch(4, b)->states);
}
