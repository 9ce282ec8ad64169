#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "edaan/errors.hpp"
#include "edaan/sampler.hpp"

namespace {

std::vector<int> labels_for(int identities, int per_identity) {
  std::vector<int> labels;
  for (int i = 0; i < identities; ++i)
    for (int k = 0; k < per_identity; ++k) labels.push_back(i);
  return labels;
}

void check_quartets(const edaan::QuartetBatch& b, const std::vector<int>& labels) {
  for (int i = 0; i < b.batch_size(); ++i) {
    CHECK(labels[b.x1[i]] == labels[b.x2[i]]);
    CHECK(b.x1[i] != b.x2[i]);
    CHECK(labels[b.x3[i]] != labels[b.x1[i]]);
    CHECK(labels[b.x4[i]] != labels[b.x1[i]]);
    CHECK(labels[b.x4[i]] != labels[b.x3[i]]);
    CHECK(b.id1[i] == labels[b.x1[i]]);
    CHECK(b.id4[i] == labels[b.x4[i]]);
  }
}

}  // namespace

TEST_CASE("quartets satisfy the identity constraints") {
  const auto labels = labels_for(4, 4);
  edaan::IdentityIndex index(labels);
  std::mt19937_64 rng(1);
  const auto b = edaan::sample_quartet_batch(index, 8, rng);
  CHECK(b.batch_size() == 8);
  check_quartets(b, labels);
}

TEST_CASE("quartet constraints hold over random datasets") {
  std::mt19937_64 gen(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<int> labels;
    const int ids = 3 + static_cast<int>(gen() % 6);
    for (int i = 0; i < ids; ++i)
      for (int k = 0, n = 1 + static_cast<int>(gen() % 4); k < n; ++k) labels.push_back(i * 7);
    // Guarantee at least one eligible anchor.
    labels.push_back(0);
    std::shuffle(labels.begin(), labels.end(), gen);
    edaan::IdentityIndex index(labels);
    check_quartets(edaan::sample_quartet_batch(index, 16, gen), labels);
  }
}

TEST_CASE("single-image identities are never anchors") {
  std::vector<int> labels{0, 0, 1, 2, 3};
  edaan::IdentityIndex index(labels);
  CHECK(index.anchor_identities() == std::vector<int>{0});
  std::mt19937_64 rng(3);
  const auto b = edaan::sample_quartet_batch(index, 50, rng);
  for (int i = 0; i < b.batch_size(); ++i) CHECK(b.id1[i] == 0);
}

TEST_CASE("quartet sampling errors") {
  std::mt19937_64 rng(4);
  edaan::IdentityIndex two(labels_for(2, 5));
  CHECK_THROWS_WITH_AS(edaan::sample_quartet_batch(two, 4, rng),
                       doctest::Contains("quartet sampling requires ≥ 3 identities"), edaan::DataError);
  edaan::IdentityIndex singles(std::vector<int>{0, 1, 2, 3});
  CHECK_THROWS_AS(edaan::sample_quartet_batch(singles, 4, rng), edaan::DataError);
}

TEST_CASE("anchor identities are uniform within 3 sigma") {
  // Unequal identity sizes: sampling is uniform over identities, not images.
  std::vector<int> labels;
  const int ids = 5;
  for (int i = 0; i < ids; ++i)
    for (int k = 0; k < 2 + 3 * i; ++k) labels.push_back(i);
  edaan::IdentityIndex index(labels);
  std::mt19937_64 rng(5);
  const int draws = 10000;
  std::map<int, int> counts;
  const auto b = edaan::sample_quartet_batch(index, draws, rng);
  for (int id : b.id1) ++counts[id];
  const double p = 1.0 / ids, expect = draws * p, sigma = std::sqrt(draws * p * (1 - p));
  for (int i = 0; i < ids; ++i) CHECK(std::fabs(counts[i] - expect) <= 3 * sigma);
}

TEST_CASE("domain pair batches are independent draws with replacement") {
  std::mt19937_64 rng(6);
  const auto b = edaan::sample_domain_pair_batch(20, 1, 16, rng);
  CHECK(b.source.size() == 16);
  CHECK(b.target.size() == 16);
  for (int t : b.target) CHECK(t == 0);
  for (int s : b.source) CHECK((s >= 0 && s < 20));
  CHECK_THROWS_AS(edaan::sample_domain_pair_batch(0, 3, 4, rng), edaan::DataError);
}

TEST_CASE("seeded sampling is reproducible") {
  edaan::IdentityIndex index(labels_for(5, 3));
  std::mt19937_64 a(7), b(7);
  const auto qa = edaan::sample_quartet_batch(index, 12, a), qb = edaan::sample_quartet_batch(index, 12, b);
  CHECK(qa.all_indices() == qb.all_indices());
  const auto da = edaan::sample_domain_pair_batch(30, 40, 16, a), db = edaan::sample_domain_pair_batch(30, 40, 16, b);
  CHECK(da.source == db.source);
  CHECK(da.target == db.target);
}

TEST_CASE("an epoch is ceil(size / batch) steps") {
  CHECK(edaan::steps_per_epoch(96, 16) == 6);
  CHECK(edaan::steps_per_epoch(97, 16) == 7);
  CHECK(edaan::steps_per_epoch(1, 16) == 1);
}
