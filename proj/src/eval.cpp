#include "edaan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "edaan/translate.hpp"

namespace edaan {

Labels labels_of(const std::vector<LabeledImage>& images) {
  Labels l;
  for (const auto& li : images) {
    l.identity.push_back(li.identity);
    l.camera.push_back(li.camera);
  }
  return l;
}

RankingResult make_ranking(std::vector<std::vector<int>> order, const Labels& query, const Labels& gallery) {
  if (order.size() != query.identity.size()) throw ShapeError("make_ranking: one ordering per query required");
  RankingResult r;
  r.order = std::move(order);
  const int n_gallery = static_cast<int>(gallery.identity.size());
  for (std::size_t q = 0; q < r.order.size(); ++q) {
    const auto& ord = r.order[q];
    std::vector<std::uint8_t> seen(n_gallery, 0);
    if (static_cast<int>(ord.size()) != n_gallery) throw ShapeError("make_ranking: ordering must cover the gallery");
    std::vector<std::uint8_t> good(ord.size()), junk(ord.size());
    for (std::size_t p = 0; p < ord.size(); ++p) {
      const int g = ord[p];
      if (g < 0 || g >= n_gallery || seen[g]++) throw ShapeError("make_ranking: ordering is not a permutation");
      const bool same_id = gallery.identity[g] == query.identity[q];
      const bool same_cam = gallery.camera[g] == query.camera[q];
      good[p] = same_id && !same_cam;
      junk[p] = same_id && same_cam;
    }
    r.good.push_back(std::move(good));
    r.junk.push_back(std::move(junk));
  }
  return r;
}

RankingResult rank_gallery(std::span<const float> query_embeddings, std::span<const float> gallery_embeddings,
                           int dim, const Labels& query, const Labels& gallery) {
  const std::size_t nq = query.identity.size(), ng = gallery.identity.size();
  if (dim <= 0 || query_embeddings.size() != nq * dim || gallery_embeddings.size() != ng * dim)
    throw ShapeError("rank_gallery: embedding matrices do not match the label counts");
  std::vector<std::vector<int>> order(nq);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(nq); ++q) {
    std::vector<double> dist(ng);
    for (std::size_t g = 0; g < ng; ++g) {
      double acc = 0;
      for (int k = 0; k < dim; ++k) {
        const double d = static_cast<double>(query_embeddings[q * dim + k]) - gallery_embeddings[g * dim + k];
        acc += d * d;
      }
      dist[g] = acc;
    }
    std::vector<int> ord(ng);
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return dist[a] < dist[b]; });
    order[q] = std::move(ord);
  }
  return make_ranking(std::move(order), query, gallery);
}

std::vector<double> cmc(const RankingResult& ranking, const std::vector<int>& ks, int* excluded) {
  std::vector<double> hits(ks.size(), 0.0);
  int scored = 0, skipped = 0;
  for (int q = 0; q < ranking.num_queries(); ++q) {
    int position = 0, first_good = -1;
    for (std::size_t p = 0; p < ranking.order[q].size(); ++p) {
      if (ranking.junk[q][p]) continue;
      ++position;
      if (ranking.good[q][p]) {
        first_good = position;
        break;
      }
    }
    if (first_good < 0) {
      ++skipped;
      continue;
    }
    ++scored;
    for (std::size_t i = 0; i < ks.size(); ++i)
      if (first_good <= ks[i]) hits[i] += 1.0;
  }
  if (excluded) *excluded = skipped;
  if (scored == 0) throw DataError("cmc: no query has a valid gallery match");
  for (double& h : hits) h /= scored;
  return hits;
}

double map_score(const RankingResult& ranking, int* excluded) {
  double total = 0.0;
  int scored = 0, skipped = 0;
  for (int q = 0; q < ranking.num_queries(); ++q) {
    int position = 0, found = 0;
    double precision_sum = 0.0;
    for (std::size_t p = 0; p < ranking.order[q].size(); ++p) {
      if (ranking.junk[q][p]) continue;
      ++position;
      if (ranking.good[q][p]) precision_sum += static_cast<double>(++found) / position;
    }
    if (found == 0) {
      ++skipped;
      continue;
    }
    ++scored;
    total += precision_sum / found;
  }
  if (excluded) *excluded = skipped;
  if (scored == 0) throw DataError("map_score: no query has a valid gallery match");
  return total / scored;
}

double attention_iou(std::span<const float> maps, std::span<const float> gt_masks, int n, int plane,
                     double threshold) {
  if (n <= 0 || maps.size() != static_cast<std::size_t>(n) * plane || gt_masks.size() != maps.size())
    throw ShapeError("attention_iou: map and mask sizes differ");
  double total = 0.0;
  for (int s = 0; s < n; ++s) {
    long inter = 0, uni = 0;
    for (int p = 0; p < plane; ++p) {
      const std::size_t i = static_cast<std::size_t>(s) * plane + p;
      const bool a = maps[i] >= threshold, g = gt_masks[i] >= 0.5f;
      inter += a && g;
      uni += a || g;
    }
    total += uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
  }
  return total / n;
}

double foreground_preservation(std::span<const float> input, std::span<const float> composed,
                               std::span<const float> gt_masks, int n, int channels, int plane) {
  const std::size_t total = static_cast<std::size_t>(n) * channels * plane;
  if (input.size() != total || composed.size() != total || gt_masks.size() != static_cast<std::size_t>(n) * plane)
    throw ShapeError("foreground_preservation: sizes differ");
  double acc = 0.0;
  std::size_t count = 0;
  for (int s = 0; s < n; ++s)
    for (int p = 0; p < plane; ++p) {
      if (gt_masks[static_cast<std::size_t>(s) * plane + p] < 0.5f) continue;
      for (int c = 0; c < channels; ++c) {
        const std::size_t i = (static_cast<std::size_t>(s) * channels + c) * plane + p;
        acc += std::abs(static_cast<double>(input[i]) - composed[i]);
        ++count;
      }
    }
  if (count == 0) throw DataError("foreground_preservation: ground-truth mask is empty");
  return acc / count;
}

namespace {

Tensor<float> slice_rows(const Tensor<float>& t, int begin, int end) {
  Shape shape = t.shape();
  shape[0] = end - begin;
  const std::size_t per = t.stride0();
  Tensor<float> out(shape);
  std::copy(t.data() + begin * per, t.data() + end * per, out.data());
  return out;
}

void append_rows(Tensor<float>& dst, const Tensor<float>& src, int at) {
  std::copy(src.vec().begin(), src.vec().end(), dst.data() + static_cast<std::size_t>(at) * src.stride0());
}

}  // namespace

Tensor<float> extract_embeddings(DomainModelSet<float>& models, const Tensor<float>& images, int batch_size) {
  if (images.ndim() != 4) throw ShapeError("extract_embeddings expects N x 3 x H x W images");
  const int n = images.dim(0);
  Tensor<float> out({n, models.config.embedding_dim});
  for (int b = 0; b < n; b += batch_size) {
    const int e = std::min(n, b + batch_size);
    Graph<float> g(false, false);
    Var<float> emb = embed(g, models, g.constant(slice_rows(images, b, e)));
    append_rows(out, emb.value(), b);
  }
  return out;
}

TranslationTensors translate_batch(DomainModelSet<float>& models, Side from, const Tensor<float>& images,
                                   bool attention_enabled, int batch_size) {
  if (images.ndim() != 4) throw ShapeError("translate_batch expects N x 3 x H x W images");
  const int n = images.dim(0);
  TranslationTensors t;
  t.input = images;
  t.mask = Tensor<float>({n, 1, images.dim(2), images.dim(3)});
  t.raw = t.background = t.foreground = t.composed = Tensor<float>(images.shape());
  const TranslatorFns<float> fns = make_translator(models, from, attention_enabled);
  for (int b = 0; b < n; b += batch_size) {
    const int e = std::min(n, b + batch_size);
    Graph<float> g(false, false);
    TranslationOutput<float> o = translate(g, fns, g.constant(slice_rows(images, b, e)));
    append_rows(t.mask, o.mask.value(), b);
    append_rows(t.raw, o.raw.value(), b);
    append_rows(t.background, o.background.value(), b);
    append_rows(t.foreground, o.foreground.value(), b);
    append_rows(t.composed, o.composed.value(), b);
  }
  return t;
}

namespace {

constexpr int kGap = 2;

ByteImage tile_of(const Tensor<float>& t, int index) {
  const int c = t.dim(1), h = t.dim(2), w = t.dim(3);
  const float* p = t.data() + static_cast<std::size_t>(index) * t.stride0();
  if (c == 3) return from_tensor(p, 3, h, w);
  // Maps in [0, 1] are shown as gray levels.
  std::vector<float> scaled(p, p + static_cast<std::size_t>(h) * w);
  for (float& v : scaled) v = 2.0f * v - 1.0f;
  return to_rgb(from_tensor(scaled.data(), 1, h, w));
}

ByteImage tile_of(const LabeledImage& li) {
  return from_tensor(li.image.data(), li.image.dim(0), li.image.dim(1), li.image.dim(2));
}

}  // namespace

ByteImage translation_grid(const TranslationTensors& t) {
  const int n = t.input.dim(0), h = t.input.dim(2), w = t.input.dim(3);
  const Tensor<float>* columns[] = {&t.input, &t.mask, &t.raw, &t.background, &t.foreground, &t.composed};
  const int cols = 6;
  ByteImage canvas(n * (h + kGap) + kGap, cols * (w + kGap) + kGap, 3, 255);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < cols; ++c) blit(canvas, tile_of(*columns[c], r), kGap + r * (h + kGap), kGap + c * (w + kGap));
  return canvas;
}

ByteImage ranking_grid(const std::vector<LabeledImage>& query, const std::vector<LabeledImage>& gallery,
                       const RankingResult& ranking, const std::vector<int>& query_rows, int top_k) {
  if (query.empty() || query_rows.empty()) throw DataError("ranking_grid: no queries to draw");
  const int h = query[0].image.dim(1), w = query[0].image.dim(2);
  constexpr int border = 2;
  const int th = h + 2 * border, tw = w + 2 * border;
  const int cols = top_k + 1;
  ByteImage canvas(static_cast<int>(query_rows.size()) * (th + kGap) + kGap, cols * (tw + kGap) + 3 * kGap, 3, 255);
  for (std::size_t r = 0; r < query_rows.size(); ++r) {
    const int q = query_rows[r];
    const int y = kGap + static_cast<int>(r) * (th + kGap);
    blit(canvas, tile_of(query[q]), y + border, kGap + border);
    draw_border(canvas, y, kGap, th, tw, border, 64, 64, 64);
    int shown = 0;
    for (std::size_t p = 0; p < ranking.order[q].size() && shown < top_k; ++p) {
      if (ranking.junk[q][p]) continue;
      const int x = 3 * kGap + (shown + 1) * (tw + kGap);
      blit(canvas, tile_of(gallery[ranking.order[q][p]]), y + border, x + border);
      if (ranking.good[q][p])
        draw_border(canvas, y, x, th, tw, border, 0, 200, 0);
      else
        draw_border(canvas, y, x, th, tw, border, 220, 0, 0);
      ++shown;
    }
  }
  return canvas;
}

void export_ranking_grid(const std::vector<LabeledImage>& query, const std::vector<LabeledImage>& gallery,
                         const RankingResult& ranking, const std::vector<int>& query_rows, const std::string& path,
                         int top_k) {
  write_png(path, ranking_grid(query, gallery, ranking, query_rows, top_k));
}

void EvalConfig::validate() const {
  if (ranks.empty()) throw ConfigError("eval.ranks must not be empty");
  for (int k : ranks)
    if (k < 1) throw ConfigError("eval.ranks entries must be >= 1");
  if (!(attention_threshold > 0.0 && attention_threshold < 1.0))
    throw ConfigError("eval.attention_threshold must be in (0, 1)");
  if (ranking_queries < 0) throw ConfigError("eval.ranking_queries must be >= 0");
  if (batch_size < 1) throw ConfigError("eval.batch_size must be positive");
}

double EvaluationReport::value(const std::string& metric, int k) const {
  for (const auto& r : rows)
    if (r.metric == metric && r.k == k) return r.value;
  throw Error("evaluation report has no metric '" + metric + "' (k=" + std::to_string(k) + ")");
}

bool EvaluationReport::has(const std::string& metric) const {
  return std::any_of(rows.begin(), rows.end(), [&](const MetricRow& r) { return r.metric == metric; });
}

EvaluationReport evaluate_model(DomainModelSet<float>& models, const EvalSets& sets, const EvalConfig& config,
                                bool attention_enabled, bool translation_trained) {
  config.validate();
  if (!sets.query || !sets.gallery || sets.query->empty() || sets.gallery->empty())
    throw DataError("evaluation requires non-empty query and gallery sets");
  auto all_indices = [](const std::vector<LabeledImage>& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  };
  EvaluationReport rep;
  rep.query_embeddings = extract_embeddings(models, stack_images<float>(*sets.query, all_indices(*sets.query)),
                                            config.batch_size);
  rep.gallery_embeddings = extract_embeddings(
      models, stack_images<float>(*sets.gallery, all_indices(*sets.gallery)), config.batch_size);
  rep.ranking = rank_gallery(rep.query_embeddings.span(), rep.gallery_embeddings.span(),
                             models.config.embedding_dim, labels_of(*sets.query), labels_of(*sets.gallery));
  const std::vector<double> curve = cmc(rep.ranking, config.ranks, &rep.excluded_queries);
  for (std::size_t i = 0; i < config.ranks.size(); ++i) rep.rows.push_back({"cmc", config.ranks[i], curve[i]});
  rep.rows.push_back({"map", 0, map_score(rep.ranking)});
  if (rep.excluded_queries > 0)
    std::cerr << "warning: " << rep.excluded_queries << " queries without a valid gallery match were excluded\n";

  // Attention and foreground metrics need ground-truth masks on every image.
  std::vector<std::pair<Side, const std::vector<LabeledImage>*>> mask_sets;
  if (sets.source_test) mask_sets.emplace_back(Side::kSource, sets.source_test);
  mask_sets.emplace_back(Side::kTarget, sets.query);
  mask_sets.emplace_back(Side::kTarget, sets.gallery);
  bool masks = true;
  for (const auto& entry : mask_sets)
    for (const auto& li : *entry.second) masks = masks && li.gt_mask.has_value();
  if (!masks || !(attention_enabled || translation_trained)) return rep;

  std::vector<float> maps, gts, inputs, composed;
  int n = 0, channels = 0, plane = 0;
  for (const auto& [side, images] : mask_sets) {
    if (images->empty()) continue;
    const auto idx = all_indices(*images);
    const TranslationTensors t =
        translate_batch(models, side, stack_images<float>(*images, idx), attention_enabled, config.batch_size);
    const Tensor<float> gt = stack_masks<float>(*images, idx);
    maps.insert(maps.end(), t.mask.vec().begin(), t.mask.vec().end());
    gts.insert(gts.end(), gt.vec().begin(), gt.vec().end());
    inputs.insert(inputs.end(), t.input.vec().begin(), t.input.vec().end());
    composed.insert(composed.end(), t.composed.vec().begin(), t.composed.vec().end());
    n += t.input.dim(0);
    channels = t.input.dim(1);
    plane = t.input.dim(2) * t.input.dim(3);
  }
  if (attention_enabled)
    rep.rows.push_back({"attn_iou", 0, attention_iou(maps, gts, n, plane, config.attention_threshold)});
  if (translation_trained)
    rep.rows.push_back({"fg_mae", 0, foreground_preservation(inputs, composed, gts, n, channels, plane)});
  return rep;
}

void write_metrics_csv(const EvaluationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write metrics '" + path + "'");
  out << "metric,k,value\n" << std::setprecision(17);
  for (const auto& r : report.rows) {
    out << r.metric << ',';
    if (r.metric == "cmc") out << r.k;
    out << ',' << r.value << '\n';
  }
  if (!out.flush()) throw Error("failed writing metrics '" + path + "'");
}

void write_embeddings_csv(const std::vector<LabeledImage>& images, const Tensor<float>& embeddings,
                          const std::string& path) {
  if (embeddings.ndim() != 2 || embeddings.dim(0) != static_cast<int>(images.size()))
    throw ShapeError("write_embeddings_csv: one embedding row per image required");
  std::ofstream out(path);
  if (!out) throw Error("cannot write embeddings '" + path + "'");
  const int dim = embeddings.dim(1);
  out << "image_path,identity,camera";
  for (int k = 0; k < dim; ++k) out << ",e" << k;
  out << '\n' << std::setprecision(9);
  for (std::size_t i = 0; i < images.size(); ++i) {
    out << images[i].path << ',' << images[i].identity << ',' << images[i].camera;
    for (int k = 0; k < dim; ++k) out << ',' << embeddings[i * dim + k];
    out << '\n';
  }
  if (!out.flush()) throw Error("failed writing embeddings '" + path + "'");
}

}  // namespace edaan
