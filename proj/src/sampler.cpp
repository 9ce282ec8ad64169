#include "edaan/sampler.hpp"

#include <algorithm>
#include <string>

#include "edaan/errors.hpp"

namespace edaan {

namespace {

// Uniform integer in [0, n) without depending on library distribution code.
int uniform_index(std::mt19937_64& rng, int n) {
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % range);
  std::uint64_t v;
  do v = rng();
  while (v >= limit);
  return static_cast<int>(v % range);
}

}  // namespace

IdentityIndex::IdentityIndex(const std::vector<int>& labels) {
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) members_[labels[i]].push_back(i);
  for (const auto& [id, m] : members_) {
    identities_.push_back(id);
    if (m.size() >= 2) anchors_.push_back(id);
  }
}

std::vector<int> QuartetBatch::all_indices() const {
  std::vector<int> out(x1);
  out.insert(out.end(), x2.begin(), x2.end());
  out.insert(out.end(), x3.begin(), x3.end());
  out.insert(out.end(), x4.begin(), x4.end());
  return out;
}

std::vector<int> QuartetBatch::all_labels() const {
  std::vector<int> out(id1);
  out.insert(out.end(), id2.begin(), id2.end());
  out.insert(out.end(), id3.begin(), id3.end());
  out.insert(out.end(), id4.begin(), id4.end());
  return out;
}

QuartetBatch sample_quartet_batch(const IdentityIndex& index, int batch_size, std::mt19937_64& rng) {
  if (index.num_identities() < 3)
    throw DataError("quartet sampling requires ≥ 3 identities, got " + std::to_string(index.num_identities()));
  if (index.anchor_identities().empty())
    throw DataError("quartet sampling requires an identity with at least two images");
  if (batch_size < 1) throw DataError("quartet batch size must be positive");
  const auto& ids = index.identities();
  const int n = index.num_identities();
  QuartetBatch b;
  for (int k = 0; k < batch_size; ++k) {
    const int a = index.anchor_identities()[uniform_index(rng, static_cast<int>(index.anchor_identities().size()))];
    const auto& am = index.members(a);
    const int i1 = uniform_index(rng, static_cast<int>(am.size()));
    int i2 = uniform_index(rng, static_cast<int>(am.size()) - 1);
    if (i2 >= i1) ++i2;
    // Negatives: draw among the remaining identities by skipping excluded positions.
    int pos_a = static_cast<int>(std::lower_bound(ids.begin(), ids.end(), a) - ids.begin());
    int j3 = uniform_index(rng, n - 1);
    if (j3 >= pos_a) ++j3;
    const int lo = std::min(pos_a, j3), hi = std::max(pos_a, j3);
    int j4 = uniform_index(rng, n - 2);
    if (j4 >= lo) ++j4;
    if (j4 >= hi) ++j4;
    const int n3 = ids[j3], n4 = ids[j4];
    const auto& m3 = index.members(n3);
    const auto& m4 = index.members(n4);
    b.x1.push_back(am[i1]);
    b.x2.push_back(am[i2]);
    b.x3.push_back(m3[uniform_index(rng, static_cast<int>(m3.size()))]);
    b.x4.push_back(m4[uniform_index(rng, static_cast<int>(m4.size()))]);
    b.id1.push_back(a);
    b.id2.push_back(a);
    b.id3.push_back(n3);
    b.id4.push_back(n4);
  }
  return b;
}

DomainPairBatch sample_domain_pair_batch(int source_size, int target_size, int batch_size, std::mt19937_64& rng) {
  if (source_size <= 0 || target_size <= 0) throw DataError("domain batch sampling requires non-empty image sets");
  if (batch_size < 1) throw DataError("domain batch size must be positive");
  DomainPairBatch b;
  for (int k = 0; k < batch_size; ++k) b.source.push_back(uniform_index(rng, source_size));
  for (int k = 0; k < batch_size; ++k) b.target.push_back(uniform_index(rng, target_size));
  return b;
}

int steps_per_epoch(int set_size, int batch_size) {
  if (batch_size < 1) throw DataError("batch size must be positive");
  return (set_size + batch_size - 1) / batch_size;
}

}  // namespace edaan
