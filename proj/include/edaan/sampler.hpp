#ifndef EDAAN_SAMPLER_HPP_
#define EDAAN_SAMPLER_HPP_

// Identity-aware quartet batches and unpaired cross-domain batches. Samplers
// return indices into the caller's image list; all randomness comes from
// the caller-owned engine.

#include <map>
#include <random>
#include <utility>
#include <vector>

namespace edaan {

// Per-identity image lists built once from a label vector.
class IdentityIndex {
 public:
  IdentityIndex() = default;
  explicit IdentityIndex(const std::vector<int>& labels);

  int num_identities() const { return static_cast<int>(identities_.size()); }
  const std::vector<int>& identities() const { return identities_; }
  // Identities with at least two images (eligible anchors).
  const std::vector<int>& anchor_identities() const { return anchors_; }
  const std::vector<int>& members(int identity) const { return members_.at(identity); }

 private:
  std::vector<int> identities_;
  std::vector<int> anchors_;
  std::map<int, std::vector<int>> members_;
};

struct QuartetBatch {
  // Indices of the anchor x1, positive x2, negative x3 and second negative x4.
  std::vector<int> x1, x2, x3, x4;
  // Identity labels of the four members.
  std::vector<int> id1, id2, id3, id4;

  int batch_size() const { return static_cast<int>(x1.size()); }
  // x1, x2, x3, x4 concatenated (and the matching labels).
  std::vector<int> all_indices() const;
  std::vector<int> all_labels() const;
};

// Anchor identity uniform over identities with >= 2 images; positive a
// different image of it; x3 any other identity; x4 an identity outside
// {id(x1), id(x3)}. Throws DataError with fewer than 3 identities or no
// eligible anchor.
QuartetBatch sample_quartet_batch(const IdentityIndex& index, int batch_size, std::mt19937_64& rng);

struct DomainPairBatch {
  std::vector<int> source;
  std::vector<int> target;
};

// Independent uniform draws with replacement from each set.
DomainPairBatch sample_domain_pair_batch(int source_size, int target_size, int batch_size, std::mt19937_64& rng);

// Steps per epoch: ceil(set_size / batch_size).
int steps_per_epoch(int set_size, int batch_size);

}  // namespace edaan

#endif  // EDAAN_SAMPLER_HPP_
