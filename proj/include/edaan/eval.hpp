#ifndef EDAAN_EVAL_HPP_
#define EDAAN_EVAL_HPP_

// Single-query retrieval scoring (CMC, mAP), attention/foreground metrics
// against ground-truth masks, and PNG/CSV exports.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edaan/data.hpp"
#include "edaan/image_io.hpp"
#include "edaan/model.hpp"

namespace edaan {

struct RankingResult {
  // Per query: gallery indices by ascending distance (ties by index).
  std::vector<std::vector<int>> order;
  // Per query and rank position: same identity, different camera.
  std::vector<std::vector<std::uint8_t>> good;
  // Per query and rank position: same identity and camera (excluded from scoring).
  std::vector<std::vector<std::uint8_t>> junk;

  int num_queries() const { return static_cast<int>(order.size()); }
};

struct Labels {
  std::vector<int> identity;
  std::vector<int> camera;
};
Labels labels_of(const std::vector<LabeledImage>& images);

// Flags an explicit ordering.
RankingResult make_ranking(std::vector<std::vector<int>> order, const Labels& query, const Labels& gallery);

// Orders the gallery for each query by squared Euclidean distance.
RankingResult rank_gallery(std::span<const float> query_embeddings, std::span<const float> gallery_embeddings,
                           int dim, const Labels& query, const Labels& gallery);

// CMC(k) for each k: fraction of scored queries whose first good entry is
// within the top k non-junk entries. Queries with no good entry are skipped
// and counted in `excluded`.
std::vector<double> cmc(const RankingResult& ranking, const std::vector<int>& ks, int* excluded = nullptr);
// Mean over scored queries of average precision with junk removed.
double map_score(const RankingResult& ranking, int* excluded = nullptr);

// Mean per-image IoU of (map >= threshold) against the binary ground truth.
// An image where both are empty scores 1.
double attention_iou(std::span<const float> maps, std::span<const float> gt_masks, int n, int plane,
                     double threshold = 0.5);
// Mean |input - composed| over ground-truth foreground pixels (all channels).
double foreground_preservation(std::span<const float> input, std::span<const float> composed,
                               std::span<const float> gt_masks, int n, int channels, int plane);

// N x 3 x H x W images -> N x embedding_dim, evaluation mode.
Tensor<float> extract_embeddings(DomainModelSet<float>& models, const Tensor<float>& images, int batch_size = 32);

// Evaluation-mode translation of N images from `from`, returned per image as
// input, mask, raw, x_b, x_f, composed (each N x C x H x W; mask N x 1 x H x W).
struct TranslationTensors {
  Tensor<float> input, mask, raw, background, foreground, composed;
};
TranslationTensors translate_batch(DomainModelSet<float>& models, Side from, const Tensor<float>& images,
                                   bool attention_enabled, int batch_size = 32);

// One row per image: input | mask | raw | x_b | x_f | composed.
ByteImage translation_grid(const TranslationTensors& t);

// One row per query: probe, then the top-`top_k` non-junk gallery entries
// bordered green (match) or red (non-match).
ByteImage ranking_grid(const std::vector<LabeledImage>& query, const std::vector<LabeledImage>& gallery,
                       const RankingResult& ranking, const std::vector<int>& query_rows, int top_k = 10);
void export_ranking_grid(const std::vector<LabeledImage>& query, const std::vector<LabeledImage>& gallery,
                         const RankingResult& ranking, const std::vector<int>& query_rows, const std::string& path,
                         int top_k = 10);

struct EvalConfig {
  std::vector<int> ranks{1, 5, 10};
  double attention_threshold = 0.5;
  int ranking_queries = 8;
  int batch_size = 32;

  void validate() const;
};

struct MetricRow {
  std::string metric;
  int k = 0;  // rank for cmc rows, 0 otherwise
  double value = 0.0;
};

struct EvaluationReport {
  std::vector<MetricRow> rows;
  int excluded_queries = 0;
  RankingResult ranking;
  Tensor<float> query_embeddings, gallery_embeddings;

  // Value of a metric row; throws when absent.
  double value(const std::string& metric, int k = 0) const;
  bool has(const std::string& metric) const;
};

struct EvalSets {
  const std::vector<LabeledImage>* query = nullptr;
  const std::vector<LabeledImage>* gallery = nullptr;
  // Source-domain test images for the attention/foreground metrics (optional).
  const std::vector<LabeledImage>* source_test = nullptr;
};

// Retrieval on the target test split; attention IoU when `attention_enabled`
// and masks exist; foreground MAE when `translation_trained` and masks exist.
EvaluationReport evaluate_model(DomainModelSet<float>& models, const EvalSets& sets, const EvalConfig& config,
                                bool attention_enabled, bool translation_trained);

void write_metrics_csv(const EvaluationReport& report, const std::string& path);
void write_embeddings_csv(const std::vector<LabeledImage>& images, const Tensor<float>& embeddings,
                          const std::string& path);

}  // namespace edaan

#endif  // EDAAN_EVAL_HPP_
