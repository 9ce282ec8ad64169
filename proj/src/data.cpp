#include "edaan/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <sstream>

namespace edaan {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::initializer_list<std::uint64_t> values) {
  std::uint64_t h = 0x6A09E667F3BCC909ull;
  for (std::uint64_t v : values) h = splitmix(h ^ splitmix(v));
  return h;
}

// Counter-based stream of uniforms in [0, 1).
class HashStream {
 public:
  explicit HashStream(std::uint64_t key) : key_(key) {}
  double uniform() { return static_cast<double>(splitmix(key_ + counter_++) >> 11) * 0x1.0p-53; }
  std::uint64_t bits() { return splitmix(key_ + counter_++); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::array<std::uint8_t, 3> hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s, hp = h * 6.0, x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1)), m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  auto q = [m](double u) { return static_cast<std::uint8_t>(std::lround(std::clamp(u + m, 0.0, 1.0) * 255.0)); };
  return {q(r), q(g), q(b)};
}

std::array<std::uint8_t, 3> palette_color(int k, int palette_size) {
  return hsv_to_rgb(0.03 + static_cast<double>(k) / palette_size, 0.85, k % 2 ? 0.55 : 0.95);
}

std::uint8_t scale_byte(std::uint8_t v, double f) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v * f, 0.0, 255.0)));
}

constexpr std::uint64_t kPoseTag = 0x706F7365ull, kBackgroundTag = 0x626B6764ull;

}  // namespace

const char* domain_name(Domain d) { return d == Domain::kSource ? "source" : "target"; }

Domain parse_domain(const std::string& s) {
  if (s == "source") return Domain::kSource;
  if (s == "target") return Domain::kTarget;
  throw DataError("unknown domain '" + s + "' (expected source or target)");
}

const char* texture_name(TextureKind t) {
  switch (t) {
    case TextureKind::kFlat: return "flat";
    case TextureKind::kStripes: return "stripes";
    case TextureKind::kChecker: return "checker";
    default: return "noise";
  }
}

TextureKind parse_texture(const std::string& s) {
  for (TextureKind t : {TextureKind::kFlat, TextureKind::kStripes, TextureKind::kChecker, TextureKind::kNoise})
    if (s == texture_name(t)) return t;
  throw ConfigError("unknown texture '" + s + "' (expected flat, stripes, checker or noise)");
}

void SyntheticSpec::validate() const {
  if (num_identities < 3)
    throw ConfigError("data.synthetic.num_identities must be >= 3 (quartet sampling requires three identities)");
  if (images_per_identity_per_domain < 1)
    throw ConfigError("data.synthetic.images_per_identity_per_domain must be positive");
  if (height <= 0 || width <= 0 || height % 4 || width % 4)
    throw ConfigError("data.synthetic image height and width must be positive multiples of 4, got " +
                      std::to_string(height) + "x" + std::to_string(width));
  if (foreground_palette_size < 2) throw ConfigError("data.synthetic.foreground_palette_size must be >= 2");
  if (num_identities > foreground_palette_size * (foreground_palette_size - 1))
    throw ConfigError("data.synthetic.num_identities exceeds the distinct appearances of the palette");
  if (!(pose_jitter >= 0.0 && pose_jitter < 0.5)) throw ConfigError("data.synthetic.pose_jitter must be in [0, 0.5)");
  if (cameras_per_domain < 1) throw ConfigError("data.synthetic.cameras_per_domain must be positive");
  if (!(min_background_separation >= 0.0))
    throw ConfigError("data.synthetic.min_background_separation must be >= 0");
  for (const auto& [name, st] : {std::pair{"source_background", source_background},
                                 std::pair{"target_background", target_background}}) {
    const std::string key = std::string("data.synthetic.") + name;
    if (!(st.hue_min >= 0.0 && st.hue_max <= 1.0 && st.hue_min <= st.hue_max))
      throw ConfigError(key + " hue range must satisfy 0 <= hue_min <= hue_max <= 1");
    if (!(st.brightness > 0.0)) throw ConfigError(key + ".brightness must be positive");
    if (!(st.saturation >= 0.0 && st.saturation <= 1.0)) throw ConfigError(key + ".saturation must be in [0, 1]");
  }
}

IdentityParams make_identity(const SyntheticSpec& spec, int identity) {
  const int p = spec.foreground_palette_size;
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b)
      if (a != b) pairs.emplace_back(a, b);
  std::mt19937_64 shuffle_rng(hash_combine({spec.seed, 0x70616C6574ull}));
  std::shuffle(pairs.begin(), pairs.end(), shuffle_rng);
  const auto [torso, legs] = pairs[static_cast<std::size_t>(identity) % pairs.size()];
  HashStream rng(hash_combine({spec.seed, 0x6964ull, static_cast<std::uint64_t>(identity)}));
  IdentityParams ip;
  ip.identity = identity;
  ip.head = {224, 172, 140};
  ip.torso = palette_color(torso, p);
  ip.legs = palette_color(legs, p);
  ip.accent = palette_color((torso + 1 + static_cast<int>(rng.bits() % (p - 1))) % p, p);
  ip.torso_width = 0.40 + 0.15 * rng.uniform();
  ip.leg_length = 0.30 + 0.10 * rng.uniform();
  ip.accent_row = static_cast<int>(rng.bits() % 3);
  return ip;
}

RenderedImage render_identity(const IdentityParams& id, const BackgroundStyle& style, std::uint64_t pose_seed,
                              std::uint64_t background_seed, int height, int width, double pose_jitter) {
  RenderedImage out{ByteImage(height, width, 3), ByteImage(height, width, 1)};

  HashStream bg(background_seed);
  const double hue = style.hue_min + (style.hue_max - style.hue_min) * bg.uniform();
  const double phase = bg.uniform();
  const int period = 4 + static_cast<int>(bg.bits() % 5);
  const auto base = hsv_to_rgb(hue, style.saturation, 0.75);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double f = 1.0;
      switch (style.texture) {
        case TextureKind::kStripes: f = 1.0 + 0.25 * std::sin(2 * M_PI * (y / static_cast<double>(period) + phase)); break;
        case TextureKind::kChecker: f = ((y / period + x / period) % 2) ? 1.0 : 0.7; break;
        case TextureKind::kNoise: f = 0.8 + 0.4 * bg.uniform(); break;
        case TextureKind::kFlat: break;
      }
      for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = scale_byte(base[c], f * style.brightness);
    }

  HashStream pose(pose_seed);
  const int dx = static_cast<int>(std::lround((2 * pose.uniform() - 1) * pose_jitter * width));
  const int dy = static_cast<int>(std::lround((2 * pose.uniform() - 1) * 0.03 * height));
  const int spread = static_cast<int>(pose.bits() % 3);
  const double cx = width / 2.0 + dx;
  const double r = 0.07 * height;
  const double head_cy = 0.06 * height + r + dy;
  const int torso_top = static_cast<int>(std::lround(head_cy + r));
  const int torso_h = static_cast<int>(std::lround(0.32 * height));
  const int torso_half = static_cast<int>(std::lround(id.torso_width * width / 2));
  const int leg_top = torso_top + torso_h;
  const int leg_h = static_cast<int>(std::lround(id.leg_length * height));
  const int leg_w = std::max(1, static_cast<int>(std::lround(0.16 * width)));
  const int accent_h = std::max(1, static_cast<int>(std::lround(0.06 * height)));
  const int accent_top = torso_top + (torso_h - accent_h) * (id.accent_row + 1) / 4;
  const int icx = static_cast<int>(std::lround(cx));

  auto paint = [&](int y, int x, const std::array<std::uint8_t, 3>& c, double shade) {
    if (y < 0 || x < 0 || y >= height || x >= width) return;
    for (int k = 0; k < 3; ++k) out.image.at(y, x, k) = scale_byte(c[k], shade);
    out.mask.at(y, x, 0) = 255;
  };
  for (int y = static_cast<int>(head_cy - r) - 1; y <= static_cast<int>(head_cy + r) + 1; ++y)
    for (int x = static_cast<int>(cx - r) - 1; x <= static_cast<int>(cx + r) + 1; ++x) {
      const double ddx = x + 0.5 - cx, ddy = y + 0.5 - head_cy;
      if (ddx * ddx + ddy * ddy <= r * r) paint(y, x, id.head, 1.0);
    }
  for (int y = torso_top; y < leg_top; ++y)
    for (int x = icx - torso_half; x < icx + torso_half; ++x) {
      const bool accent = y >= accent_top && y < accent_top + accent_h;
      paint(y, x, accent ? id.accent : id.torso, 1.0 - 0.15 * (y - torso_top) / std::max(1, torso_h));
    }
  for (int y = leg_top; y < leg_top + leg_h; ++y)
    for (int side : {-1, 1}) {
      const int inner = icx + side * (1 + spread);
      for (int k = 0; k < leg_w; ++k) paint(y, side < 0 ? inner - 1 - k : inner + k, id.legs, 1.0);
    }
  return out;
}

SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticDataset ds;
  for (Domain domain : {Domain::kSource, Domain::kTarget}) {
    const BackgroundStyle& style = domain == Domain::kSource ? spec.source_background : spec.target_background;
    auto& out = domain == Domain::kSource ? ds.source : ds.target;
    for (int i = 0; i < spec.num_identities; ++i) {
      const IdentityParams ip = make_identity(spec, i);
      for (int j = 0; j < spec.images_per_identity_per_domain; ++j) {
        const std::uint64_t pose_seed = hash_combine({spec.seed, kPoseTag, static_cast<std::uint64_t>(i),
                                                      static_cast<std::uint64_t>(j)});
        const std::uint64_t bg_seed =
            hash_combine({spec.seed, kBackgroundTag, static_cast<std::uint64_t>(domain),
                          static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
        RenderedImage r = render_identity(ip, style, pose_seed, bg_seed, spec.height, spec.width, spec.pose_jitter);
        LabeledImage li;
        li.image = to_tensor(r.image);
        li.gt_mask = mask_to_tensor(r.mask);
        li.identity = i;
        li.camera = 1 + j % spec.cameras_per_domain;
        li.domain = domain;
        li.path = "images/" + reid_filename(i, li.camera, j);
        out.push_back(std::move(li));
      }
    }
  }
  return ds;
}

std::string reid_filename(int identity, int camera, int frame) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d_c%d_%06d.png", identity, camera, frame);
  return buf;
}

std::optional<std::pair<int, int>> parse_reid_filename(const std::string& name) {
  static const std::regex pattern(R"(^(\d+)_c(\d+)(?:s\d+)?_[^/]*\.png$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(name, m, pattern)) return std::nullopt;
  return std::pair{std::stoi(m[1].str()), std::stoi(m[2].str())};
}

void write_domain(const std::vector<LabeledImage>& images, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");
  std::ofstream manifest(fs::path(dir) / "manifest.csv");
  if (!manifest) throw Error("cannot write manifest in '" + dir + "'");
  manifest << "path,identity,camera,domain,mask_path\n";
  for (const LabeledImage& li : images) {
    const std::string name = fs::path(li.path).filename().string();
    const std::string image_rel = "images/" + name;
    write_png((fs::path(dir) / image_rel).string(),
              from_tensor(li.image.data(), li.image.dim(0), li.image.dim(1), li.image.dim(2)));
    std::string mask_rel;
    if (li.gt_mask) {
      mask_rel = "masks/" + name;
      write_png((fs::path(dir) / mask_rel).string(),
                mask_from_tensor(li.gt_mask->data(), li.gt_mask->dim(1), li.gt_mask->dim(2)));
    }
    manifest << image_rel << ',' << li.identity << ',' << li.camera << ',' << domain_name(li.domain) << ','
             << mask_rel << '\n';
  }
  if (!manifest.flush()) throw Error("failed writing manifest in '" + dir + "'");
}

void write_synthetic_dataset(const SyntheticDataset& dataset, const std::string& root) {
  write_domain(dataset.source, (fs::path(root) / "source").string());
  write_domain(dataset.target, (fs::path(root) / "target").string());
}

namespace {

LabeledImage load_one(const fs::path& file, int identity, int camera, Domain domain, int height, int width) {
  LabeledImage li;
  li.image = to_tensor(resize_bilinear(to_rgb(read_png(file.string())), height, width));
  li.identity = identity;
  li.camera = camera;
  li.domain = domain;
  return li;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  for (auto& c : cells)
    if (!c.empty() && c.back() == '\r') c.pop_back();
  return cells;
}

}  // namespace

std::vector<LabeledImage> load_reid_directory(const std::string& dir, DirectoryLayout layout, int height,
                                              int width, Domain domain, LoadReport* report) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory '" + dir + "' does not exist");
  LoadReport local;
  std::vector<LabeledImage> out;
  if (layout == DirectoryLayout::kFilename) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      const auto parsed = parse_reid_filename(f.filename().string());
      if (!parsed) {
        ++local.skipped;
        continue;
      }
      try {
        LabeledImage li = load_one(f, parsed->first, parsed->second, domain, height, width);
        li.path = f.filename().string();
        out.push_back(std::move(li));
      } catch (const DataError&) {
        ++local.skipped;
      }
    }
  } else {
    const fs::path manifest_path = fs::path(dir) / "manifest.csv";
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open manifest '" + manifest_path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("manifest '" + manifest_path.string() + "' is empty");
    const auto header = split_csv_line(line);
    auto column = [&](const std::string& name) -> int {
      auto it = std::find(header.begin(), header.end(), name);
      return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    const int c_path = column("path"), c_id = column("identity"), c_cam = column("camera");
    const int c_domain = column("domain"), c_mask = column("mask_path");
    if (c_path < 0 || c_id < 0 || c_cam < 0)
      throw DataError("manifest '" + manifest_path.string() + "' must have path,identity,camera columns");
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      const auto cells = split_csv_line(line);
      try {
        if (static_cast<int>(cells.size()) <= std::max({c_path, c_id, c_cam})) throw DataError("short row");
        const int identity = std::stoi(cells[c_id]), camera = std::stoi(cells[c_cam]);
        if (identity < 0) throw DataError("negative identity");
        const Domain d = c_domain >= 0 && c_domain < static_cast<int>(cells.size()) && !cells[c_domain].empty()
                             ? parse_domain(cells[c_domain])
                             : domain;
        LabeledImage li = load_one(fs::path(dir) / cells[c_path], identity, camera, d, height, width);
        li.path = cells[c_path];
        if (c_mask >= 0 && c_mask < static_cast<int>(cells.size()) && !cells[c_mask].empty()) {
          ByteImage m = read_png((fs::path(dir) / cells[c_mask]).string());
          if (m.channels != 1 || m.height != height || m.width != width)
            throw DataError("mask '" + cells[c_mask] + "' must be single-channel at the image size");
          li.gt_mask = mask_to_tensor(m);
        }
        out.push_back(std::move(li));
      } catch (const std::logic_error&) {
        ++local.skipped;
      } catch (const DataError&) {
        ++local.skipped;
      }
    }
  }
  local.loaded = static_cast<int>(out.size());
  if (report) *report = local;
  if (local.skipped > 0)
    std::cerr << "warning: skipped " << local.skipped << " unreadable or unparseable entries in '" << dir << "'\n";
  if (out.empty()) throw DataError("no images loaded from '" + dir + "'");
  return out;
}

void ProtocolConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("protocol.train_fraction must be in (0, 1)");
  if (queries_per_identity < 1) throw ConfigError("protocol.queries_per_identity must be positive");
  if ((query_camera >= 0) != (gallery_camera >= 0))
    throw ConfigError("protocol.query_camera and protocol.gallery_camera must be set together");
}

std::pair<std::vector<int>, std::vector<int>> partition_identities(std::vector<int> identities,
                                                                   const ProtocolConfig& protocol) {
  std::sort(identities.begin(), identities.end());
  identities.erase(std::unique(identities.begin(), identities.end()), identities.end());
  std::mt19937_64 rng(protocol.seed);
  std::shuffle(identities.begin(), identities.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::lround(identities.size() * protocol.train_fraction));
  std::vector<int> train(identities.begin(), identities.begin() + n_train);
  std::vector<int> test(identities.begin() + n_train, identities.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

DatasetSplits split_train_query_gallery(const std::vector<LabeledImage>& dataset, const ProtocolConfig& protocol) {
  protocol.validate();
  if (dataset.empty()) throw DataError("cannot split an empty dataset");
  std::vector<int> ids;
  for (const auto& li : dataset) ids.push_back(li.identity);
  DatasetSplits s;
  std::tie(s.train_identities, s.test_identities) = partition_identities(ids, protocol);
  const std::set<int> train_set(s.train_identities.begin(), s.train_identities.end());
  std::map<int, std::vector<int>> by_identity;
  for (int i = 0; i < static_cast<int>(dataset.size()); ++i) {
    if (train_set.count(dataset[i].identity))
      s.train.push_back(dataset[i]);
    else
      by_identity[dataset[i].identity].push_back(i);
  }
  const bool fixed_cameras = protocol.query_camera >= 0;
  for (auto& [identity, members] : by_identity) {
    if (fixed_cameras) {
      std::vector<int> q, g;
      for (int i : members) {
        if (dataset[i].camera == protocol.query_camera && static_cast<int>(q.size()) < protocol.queries_per_identity)
          q.push_back(i);
        else if (dataset[i].camera == protocol.gallery_camera)
          g.push_back(i);
      }
      if (q.empty() || g.empty()) {
        ++s.excluded_identities;
        continue;
      }
      for (int i : q) s.query.push_back(dataset[i]);
      for (int i : g) s.gallery.push_back(dataset[i]);
      continue;
    }
    if (members.size() < 2) {
      ++s.excluded_identities;
      continue;
    }
    // Greedy: accept a query while every chosen query keeps a cross-camera
    // gallery match.
    std::vector<bool> is_query(members.size(), false);
    auto has_cross_camera = [&](std::size_t q) {
      for (std::size_t k = 0; k < members.size(); ++k)
        if (!is_query[k] && k != q && dataset[members[k]].camera != dataset[members[q]].camera) return true;
      return false;
    };
    int chosen = 0;
    for (std::size_t k = 0; k < members.size() && chosen < protocol.queries_per_identity; ++k) {
      if (!has_cross_camera(k)) continue;
      is_query[k] = true;
      bool ok = true;
      for (std::size_t q = 0; q < members.size(); ++q)
        if (is_query[q] && !has_cross_camera(q)) ok = false;
      if (ok)
        ++chosen;
      else
        is_query[k] = false;
    }
    if (chosen == 0) is_query[0] = true;  // single-camera identity: same-camera matches become junk
    for (std::size_t k = 0; k < members.size(); ++k)
      (is_query[k] ? s.query : s.gallery).push_back(dataset[members[k]]);
  }
  if (s.excluded_identities > 0)
    std::cerr << "warning: " << s.excluded_identities << " test identities excluded (no query/gallery pair)\n";
  return s;
}

template <typename Dtype>
Tensor<Dtype> stack_images(const std::vector<LabeledImage>& images, const std::vector<int>& indices) {
  if (indices.empty()) throw ShapeError("stack_images: empty selection");
  const Tensor<float>& first = images.at(indices[0]).image;
  Tensor<Dtype> out({static_cast<int>(indices.size()), first.dim(0), first.dim(1), first.dim(2)});
  const std::size_t per = first.count();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Tensor<float>& im = images.at(indices[k]).image;
    check_same_shape(im.shape(), first.shape(), "stack_images");
    std::copy(im.vec().begin(), im.vec().end(), out.data() + k * per);
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> stack_masks(const std::vector<LabeledImage>& images, const std::vector<int>& indices) {
  if (indices.empty()) throw ShapeError("stack_masks: empty selection");
  const LabeledImage& first = images.at(indices[0]);
  if (!first.gt_mask) throw DataError("image '" + first.path + "' has no ground-truth mask");
  Tensor<Dtype> out({static_cast<int>(indices.size()), 1, first.gt_mask->dim(1), first.gt_mask->dim(2)});
  const std::size_t per = first.gt_mask->count();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const LabeledImage& li = images.at(indices[k]);
    if (!li.gt_mask) throw DataError("image '" + li.path + "' has no ground-truth mask");
    std::copy(li.gt_mask->vec().begin(), li.gt_mask->vec().end(), out.data() + k * per);
  }
  return out;
}

template Tensor<float> stack_images<float>(const std::vector<LabeledImage>&, const std::vector<int>&);
template Tensor<double> stack_images<double>(const std::vector<LabeledImage>&, const std::vector<int>&);
template Tensor<float> stack_masks<float>(const std::vector<LabeledImage>&, const std::vector<int>&);
template Tensor<double> stack_masks<double>(const std::vector<LabeledImage>&, const std::vector<int>&);

}  // namespace edaan
