#include <filesystem>
#include <cmath>
#include <fstream>
#include <set>

#include "doctest.h"
#include "edaan/data.hpp"
#include "edaan/image_io.hpp"
#include "../support/fixtures.hpp"

namespace fs = std::filesystem;
using edaan::SyntheticSpec;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.num_identities = 4;
  s.images_per_identity_per_domain = 3;
  s.height = 32;
  s.width = 16;
  return s;
}

double mean_background(const edaan::LabeledImage& im, int channel) {
  double s = 0;
  int n = 0;
  const int plane = im.image.dim(1) * im.image.dim(2);
  for (int p = 0; p < plane; ++p)
    if ((*im.gt_mask)[p] < 0.5) s += im.image[channel * plane + p], ++n;
  return s / n;
}

}  // namespace

TEST_CASE("synthetic dataset has the requested counts, labels and masks") {
  const auto ds = edaan::generate_synthetic_dataset(small_spec());
  REQUIRE(ds.source.size() == 12);
  REQUIRE(ds.target.size() == 12);
  std::set<int> ids;
  for (const auto& im : ds.source) {
    ids.insert(im.identity);
    CHECK(im.image.shape() == edaan::Shape{3, 32, 16});
    REQUIRE(im.gt_mask.has_value());
    double fg = 0;
    for (float v : im.gt_mask->vec()) {
      CHECK((v == 0.0f || v == 1.0f));
      fg += v;
    }
    CHECK(fg > 0);
    CHECK(fg < 32 * 16);
    CHECK(im.domain == edaan::Domain::kSource);
    CHECK((im.camera == 1 || im.camera == 2));
    for (float v : im.image.vec()) CHECK((v >= -1.0f && v <= 1.0f));
  }
  CHECK(ids.size() == 4);
}

TEST_CASE("domains share foregrounds and differ in background statistics") {
  const SyntheticSpec spec;
  const auto ds = edaan::generate_synthetic_dataset(spec);
  const int plane = spec.height * spec.width;
  double src_bg[3] = {0, 0, 0}, tgt_bg[3] = {0, 0, 0};
  for (std::size_t i = 0; i < ds.source.size(); ++i) {
    const auto& s = ds.source[i];
    const auto& t = ds.target[i];
    CHECK(s.identity == t.identity);
    CHECK(s.gt_mask->vec() == t.gt_mask->vec());
    bool same_fg = true;
    for (int c = 0; c < 3; ++c)
      for (int p = 0; p < plane; ++p)
        if ((*s.gt_mask)[p] > 0.5) same_fg &= s.image[c * plane + p] == t.image[c * plane + p];
    CHECK(same_fg);
    for (int c = 0; c < 3; ++c) src_bg[c] += mean_background(s, c), tgt_bg[c] += mean_background(t, c);
  }
  double gap = 0;
  for (int c = 0; c < 3; ++c) gap = std::max(gap, std::fabs(src_bg[c] - tgt_bg[c]) / ds.source.size());
  CHECK(gap > spec.min_background_separation);
}

TEST_CASE("mask coverage of default silhouettes lies in [0.15, 0.6]") {
  const SyntheticSpec spec;
  const auto ds = edaan::generate_synthetic_dataset(spec);
  for (const auto& im : ds.target) {
    double fg = 0;
    for (float v : im.gt_mask->vec()) fg += v;
    const double frac = fg / (spec.height * spec.width);
    CHECK(frac >= 0.15);
    CHECK(frac <= 0.6);
  }
}

TEST_CASE("rendering is a pure function of its seeds") {
  SyntheticSpec spec;
  const auto id = edaan::make_identity(spec, 3);
  const auto a = edaan::render_identity(id, spec.source_background, 11, 12, 64, 32, 0.0);
  const auto b = edaan::render_identity(id, spec.source_background, 11, 12, 64, 32, 0.0);
  CHECK(a.image.pixels == b.image.pixels);
  CHECK(a.mask.pixels == b.mask.pixels);
  // Extreme jitter clips the silhouette instead of failing.
  const auto c = edaan::render_identity(id, spec.source_background, 11, 12, 64, 32, 0.49);
  CHECK(c.mask.pixels.size() == 64u * 32u);
}

TEST_CASE("dataset written to disk reloads with identical labels, pixels and masks") {
  const std::string dir = fixtures::scratch_dir("data_roundtrip");
  const auto ds = edaan::generate_synthetic_dataset(small_spec());
  edaan::write_synthetic_dataset(ds, dir);
  const auto back = edaan::load_reid_directory((fs::path(dir) / "source").string(), edaan::DirectoryLayout::kManifest,
                                               32, 16, edaan::Domain::kSource);
  REQUIRE(back.size() == ds.source.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].identity == ds.source[i].identity);
    CHECK(back[i].camera == ds.source[i].camera);
    CHECK(back[i].image.vec() == ds.source[i].image.vec());
    REQUIRE(back[i].gt_mask.has_value());
    CHECK(back[i].gt_mask->vec() == ds.source[i].gt_mask->vec());
  }
  // The filename layout reads the same identities without masks.
  const auto by_name = edaan::load_reid_directory((fs::path(dir) / "source" / "images").string(),
                                                  edaan::DirectoryLayout::kFilename, 32, 16, edaan::Domain::kSource);
  CHECK(by_name.size() == ds.source.size());
  CHECK_FALSE(by_name[0].gt_mask.has_value());
}

TEST_CASE("regeneration with the same spec is byte-identical") {
  const std::string a = fixtures::scratch_dir("regen_a"), b = fixtures::scratch_dir("regen_b");
  edaan::write_synthetic_dataset(edaan::generate_synthetic_dataset(small_spec()), a);
  edaan::write_synthetic_dataset(edaan::generate_synthetic_dataset(small_spec()), b);
  CHECK(fixtures::snapshot_tree(a) == fixtures::snapshot_tree(b));
  auto other = small_spec();
  other.seed = 9;
  const std::string c = fixtures::scratch_dir("regen_c");
  edaan::write_synthetic_dataset(edaan::generate_synthetic_dataset(other), c);
  CHECK(fixtures::snapshot_tree(a) != fixtures::snapshot_tree(c));
}

TEST_CASE("synthetic spec validation names the offending key") {
  auto s = small_spec();
  s.num_identities = 2;
  CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("data.synthetic.num_identities"), edaan::ConfigError);
  s = small_spec();
  s.height = 30;
  CHECK_THROWS_AS(s.validate(), edaan::ConfigError);
  s = small_spec();
  s.pose_jitter = 0.5;
  CHECK_THROWS_AS(s.validate(), edaan::ConfigError);
}

TEST_CASE("re-ID filenames round-trip and malformed names are rejected") {
  CHECK(edaan::reid_filename(12, 3, 45) == "0012_c3_000045.png");
  const auto p = edaan::parse_reid_filename("0012_c3_000045.png");
  REQUIRE(p.has_value());
  CHECK(p->first == 12);
  CHECK(p->second == 3);
  CHECK(edaan::parse_reid_filename("0002_c1s1_000451_03.png").has_value());
  CHECK_FALSE(edaan::parse_reid_filename("junk.png").has_value());
  CHECK_FALSE(edaan::parse_reid_filename("0001_c1_0001.jpg").has_value());
}

TEST_CASE("directory loading skips unreadable entries and fails when empty") {
  const std::string dir = fixtures::scratch_dir("load_skip");
  const auto ds = edaan::generate_synthetic_dataset(small_spec());
  edaan::write_domain(ds.source, dir);
  std::ofstream(fs::path(dir) / "images" / "0099_c1_000000.png") << "not a png";
  std::ofstream(fs::path(dir) / "images" / "readme.txt") << "x";
  edaan::LoadReport rep;
  const auto imgs = edaan::load_reid_directory((fs::path(dir) / "images").string(), edaan::DirectoryLayout::kFilename,
                                               32, 16, edaan::Domain::kTarget, &rep);
  CHECK(imgs.size() == ds.source.size());
  CHECK(rep.skipped >= 1);
  const std::string empty = fixtures::scratch_dir("load_empty");
  CHECK_THROWS_AS(edaan::load_reid_directory(empty, edaan::DirectoryLayout::kFilename, 32, 16, edaan::Domain::kSource),
                  edaan::DataError);
}

TEST_CASE("identity partition is disjoint, seeded and shared across domains") {
  edaan::ProtocolConfig p;
  p.train_fraction = 0.5;
  std::vector<int> ids{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const auto [train, test] = edaan::partition_identities(ids, p);
  CHECK(train.size() == 5);
  CHECK(test.size() == 5);
  std::set<int> all(train.begin(), train.end());
  for (int t : test) CHECK(all.insert(t).second);
  const auto again = edaan::partition_identities({9, 8, 7, 6, 5, 4, 3, 2, 1, 0}, p);
  CHECK(again.first == train);
}

TEST_CASE("query/gallery split follows the single-query cross-camera protocol") {
  auto spec = small_spec();
  spec.num_identities = 6;
  spec.images_per_identity_per_domain = 4;
  const auto ds = edaan::generate_synthetic_dataset(spec);
  edaan::ProtocolConfig p;
  const auto split = edaan::split_train_query_gallery(ds.target, p);
  CHECK(split.train.size() + split.query.size() + split.gallery.size() == ds.target.size());
  std::set<int> train_ids(split.train_identities.begin(), split.train_identities.end());
  for (const auto& q : split.query) {
    CHECK(train_ids.count(q.identity) == 0);
    bool cross_camera_match = false;
    for (const auto& g : split.gallery) cross_camera_match |= g.identity == q.identity && g.camera != q.camera;
    CHECK(cross_camera_match);
  }
  CHECK(split.query.size() == split.test_identities.size());
}
