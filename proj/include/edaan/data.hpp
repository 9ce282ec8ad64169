#ifndef EDAAN_DATA_HPP_
#define EDAAN_DATA_HPP_

// Two-domain synthetic re-ID images with ground-truth foreground masks,
// ingestion of re-ID image directories, and train/query/gallery splits.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "edaan/image_io.hpp"
#include "edaan/tensor.hpp"

namespace edaan {

enum class Domain { kSource, kTarget };
const char* domain_name(Domain d);
Domain parse_domain(const std::string& s);

struct LabeledImage {
  Tensor<float> image;                 // 3 x H x W in [-1, 1]
  int identity = 0;
  int camera = 0;
  Domain domain = Domain::kSource;
  std::optional<Tensor<float>> gt_mask;  // 1 x H x W in {0, 1}
  std::string path;                    // relative file name when loaded or written
};

enum class TextureKind { kFlat, kStripes, kChecker, kNoise };
const char* texture_name(TextureKind t);
TextureKind parse_texture(const std::string& s);

struct BackgroundStyle {
  double hue_min = 0.0;  // hues in [0, 1)
  double hue_max = 0.1;
  TextureKind texture = TextureKind::kFlat;
  double brightness = 1.0;  // scales background pixels only
  double saturation = 0.6;
};

struct SyntheticSpec {
  int num_identities = 12;
  int images_per_identity_per_domain = 16;
  int height = 64;
  int width = 32;
  std::uint64_t seed = 0;
  BackgroundStyle source_background{0.55, 0.65, TextureKind::kStripes, 1.0, 0.6};
  BackgroundStyle target_background{0.02, 0.12, TextureKind::kChecker, 0.7, 0.7};
  int foreground_palette_size = 8;
  double pose_jitter = 0.08;  // fraction of the image width
  int cameras_per_domain = 2;
  // Minimum gap between the two domains' mean background colors (largest
  // channel difference, [-1, 1] pixel units).
  double min_background_separation = 0.15;

  // Throws ConfigError naming the violated constraint.
  void validate() const;
};

// Per-identity appearance, independent of the domain.
struct IdentityParams {
  int identity = 0;
  std::array<std::uint8_t, 3> head{}, torso{}, legs{}, accent{};
  double torso_width = 0.45;  // fraction of image width
  double leg_length = 0.4;    // fraction of image height
  int accent_row = 0;         // band position inside the torso, 0..2
};

struct RenderedImage {
  ByteImage image;  // RGB
  ByteImage mask;   // gray, 255 on foreground
};

IdentityParams make_identity(const SyntheticSpec& spec, int identity);

// Foreground depends only on (identity, pose_seed); the background only on
// (style, background_seed). Out-of-frame silhouette parts are clipped.
RenderedImage render_identity(const IdentityParams& identity, const BackgroundStyle& style,
                              std::uint64_t pose_seed, std::uint64_t background_seed, int height, int width,
                              double pose_jitter);

struct SyntheticDataset {
  std::vector<LabeledImage> source;
  std::vector<LabeledImage> target;
};

SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec);

// Conventional file name "<id>_c<cam>_<frame>.png".
std::string reid_filename(int identity, int camera, int frame);
// Identity and camera from "<id>_c<cam>..." names; nullopt when unparseable.
std::optional<std::pair<int, int>> parse_reid_filename(const std::string& name);

// Writes <dir>/images/*.png, <dir>/masks/*.png and <dir>/manifest.csv.
void write_domain(const std::vector<LabeledImage>& images, const std::string& dir);
// Writes <root>/source and <root>/target.
void write_synthetic_dataset(const SyntheticDataset& dataset, const std::string& root);

enum class DirectoryLayout { kFilename, kManifest };

struct LoadReport {
  int loaded = 0;
  int skipped = 0;
};

// kFilename: every "<id>_c<cam>..." PNG in `dir`; kManifest: <dir>/manifest.csv
// with columns path,identity,camera[,domain,mask_path]. Images are resized to
// height x width. Throws DataError when nothing is loaded.
std::vector<LabeledImage> load_reid_directory(const std::string& dir, DirectoryLayout layout, int height,
                                              int width, Domain domain, LoadReport* report = nullptr);

struct ProtocolConfig {
  double train_fraction = 0.5;
  int queries_per_identity = 1;
  std::uint64_t seed = 0;
  // When >= 0, queries come only from query_camera and the gallery only from gallery_camera.
  int query_camera = -1;
  int gallery_camera = -1;

  void validate() const;
};

struct DatasetSplits {
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> query;
  std::vector<LabeledImage> gallery;
  std::vector<int> train_identities;
  std::vector<int> test_identities;
  int excluded_identities = 0;  // test identities without a query/gallery pair
};

// Identity partition depends only on the identity set and protocol seed, so
// two domains over the same identities split identically.
std::pair<std::vector<int>, std::vector<int>> partition_identities(std::vector<int> identities,
                                                                   const ProtocolConfig& protocol);

DatasetSplits split_train_query_gallery(const std::vector<LabeledImage>& dataset, const ProtocolConfig& protocol);

// Stacks 3 x H x W images (selected by index) into N x 3 x H x W.
template <typename Dtype>
Tensor<Dtype> stack_images(const std::vector<LabeledImage>& images, const std::vector<int>& indices);
template <typename Dtype>
Tensor<Dtype> stack_masks(const std::vector<LabeledImage>& images, const std::vector<int>& indices);

}  // namespace edaan

#endif  // EDAAN_DATA_HPP_
