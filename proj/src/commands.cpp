#include "edaan/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"

#include "edaan/image_io.hpp"

namespace edaan {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const CheckpointError*>(&e)) return kExitCheckpoint;
  return kExitOther;
}

PreparedData prepare_data(const RunConfig& config) {
  config.validate();
  const int h = config.train.network.image_height, w = config.train.network.image_width;
  const DirectoryLayout layout =
      config.data.kind == DataKind::kSynthetic ? DirectoryLayout::kManifest : config.data.layout;
  const auto source_path = config.data.source_path(), target_path = config.data.target_path();
  if (!fs::is_directory(source_path)) throw DataError("source dataset directory '" + source_path + "' not found");
  if (!fs::is_directory(target_path)) throw DataError("target dataset directory '" + target_path + "' not found");
  const auto source = load_reid_directory(source_path, layout, h, w, Domain::kSource);
  const auto target = load_reid_directory(target_path, layout, h, w, Domain::kTarget);
  PreparedData p;
  p.source = split_train_query_gallery(source, config.protocol);
  p.target = split_train_query_gallery(target, config.protocol);
  if (p.target.query.empty() || p.target.gallery.empty())
    throw DataError("target test split has no query/gallery images");
  p.training.source = p.source.train;
  p.training.target = p.target.train;
  p.source_test = p.source.query;
  p.source_test.insert(p.source_test.end(), p.source.gallery.begin(), p.source.gallery.end());
  return p;
}

std::pair<int, int> cmd_gen_data(const RunConfig& config) {
  config.validate();
  if (config.data.kind != DataKind::kSynthetic) throw ConfigError("gen-data requires data.kind = \"synthetic\"");
  const SyntheticDataset ds = generate_synthetic_dataset(config.data.synthetic);
  write_synthetic_dataset(ds, config.data.root);
  return {static_cast<int>(ds.source.size()), static_cast<int>(ds.target.size())};
}

TrainResult cmd_train(const RunConfig& config, const std::string& resume_from) {
  config.validate();
  if (!resume_from.empty() && !fs::exists(resume_from))
    throw CheckpointError("resume checkpoint '" + resume_from + "' not found");
  const PreparedData data = prepare_data(config);
  TrainOutput out;
  out.run_dir = config.run_dir();
  out.config_snapshot = run_config_to_json(config).dump(2) + "\n";
  out.resume_from = resume_from;
  return train(config.train, data.training, out);
}

std::string default_checkpoint(const RunConfig& config) {
  fs::path dir(config.run_dir());
  if (config.train.mode == TrainMode::kDaanTwoStage) dir /= "stage2_reid";
  return (dir / "ckpt_final.bin").string();
}

int cmd_translate(const RunConfig& config, const std::string& checkpoint, const std::string& input_dir,
                  const std::string& out_dir, Side from) {
  config.validate();
  TrainConfig trained;
  TrainerState state = load_checkpoint(checkpoint, &trained);
  if (trained.mode == TrainMode::kDirectTransfer)
    throw CheckpointError("checkpoint '" + checkpoint + "' was trained without translation networks");
  if (!fs::is_directory(input_dir)) throw DataError("input directory '" + input_dir + "' not found");
  std::vector<fs::path> inputs;
  for (const auto& e : fs::directory_iterator(input_dir))
    if (e.is_regular_file() && e.path().extension() == ".png") inputs.push_back(e.path());
  std::sort(inputs.begin(), inputs.end());
  if (inputs.empty()) throw DataError("no PNG images in '" + input_dir + "'");
  const int h = trained.network.image_height, w = trained.network.image_width;
  // Decode everything before writing anything.
  std::vector<Tensor<float>> images;
  for (const auto& path : inputs) {
    ByteImage img = to_rgb(read_png(path.string()));
    if (img.height != h || img.width != w) img = resize_bilinear(img, h, w);
    Tensor<float> t = to_tensor(img);
    t.reshape({1, 3, h, w});
    images.push_back(std::move(t));
  }
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const TranslationTensors t = translate_batch(state.models, from, images[i], trained.attention_enabled, 1);
    write_png((fs::path(out_dir) / (inputs[i].stem().string() + "_grid.png")).string(), translation_grid(t));
  }
  return static_cast<int>(inputs.size());
}

EvaluationReport cmd_evaluate(const RunConfig& config, const std::string& checkpoint, const std::string& out_dir) {
  config.validate();
  TrainConfig trained;
  TrainerState state = load_checkpoint(checkpoint, &trained);
  const PreparedData data = prepare_data(config);
  EvalSets sets{&data.target.query, &data.target.gallery, &data.source_test};
  const bool translation = trained.mode != TrainMode::kDirectTransfer;
  EvaluationReport report =
      evaluate_model(state.models, sets, config.eval, translation && trained.attention_enabled, translation);
  fs::create_directories(out_dir);
  write_metrics_csv(report, (fs::path(out_dir) / "metrics.csv").string());
  write_embeddings_csv(data.target.query, report.query_embeddings,
                       (fs::path(out_dir) / "query_embeddings.csv").string());
  write_embeddings_csv(data.target.gallery, report.gallery_embeddings,
                       (fs::path(out_dir) / "gallery_embeddings.csv").string());
  const int nq = static_cast<int>(data.target.query.size());
  const int shown = std::min(config.eval.ranking_queries, nq);
  if (shown > 0) {
    std::vector<int> rows;
    for (int r = 0; r < shown; ++r) rows.push_back(r * nq / shown);
    export_ranking_grid(data.target.query, data.target.gallery, report.ranking, rows,
                        (fs::path(out_dir) / "ranking.png").string());
  }
  return report;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Attention-guided domain adaptation for person re-identification"};
  app.require_subcommand(1);
  std::string config_path, checkpoint, input_dir, out_dir, resume, run_dir, from = "source";
  std::vector<std::string> overrides;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "JSON run configuration");
    cmd->add_option("--set", overrides, "Override a config key (key.path=value); repeatable");
  };
  CLI::App* gen = app.add_subcommand("gen-data", "Render the synthetic two-domain dataset");
  add_common(gen);
  CLI::App* tr = app.add_subcommand("train", "Train a model into the run directory");
  add_common(tr);
  tr->add_option("--resume", resume, "Checkpoint to continue from");
  CLI::App* tl = app.add_subcommand("translate", "Export translation grids for a directory of images");
  add_common(tl);
  tl->add_option("--checkpoint", checkpoint, "Checkpoint (default: final checkpoint of the run)");
  tl->add_option("--input", input_dir, "Directory of PNG images")->required();
  tl->add_option("--out", out_dir, "Output directory")->required();
  tl->add_option("--from", from, "Domain of the inputs")->check(CLI::IsMember({"source", "target"}));
  CLI::App* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on the target test split");
  add_common(ev);
  ev->add_option("--run", run_dir, "Run directory (uses its config.snapshot)");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint (default: final checkpoint of the run)");
  ev->add_option("--out", out_dir, "Output directory (default: <run>/eval)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (ev->parsed() && config_path.empty() && !run_dir.empty())
      config_path = (fs::path(run_dir) / "config.snapshot").string();
    if (config_path.empty()) throw ConfigError("--config is required");
    const RunConfig config = load_run_config(config_path, overrides);
    if (gen->parsed()) {
      const auto [ns, nt] = cmd_gen_data(config);
      std::cout << "wrote " << ns << " source and " << nt << " target images under " << config.data.root << "\n";
    } else if (tr->parsed()) {
      const TrainResult r = cmd_train(config, resume);
      std::cout << "trained " << mode_name(config.train.mode) << " into " << config.run_dir() << " ("
                << r.num_classes << " classes)\n";
    } else if (tl->parsed()) {
      if (checkpoint.empty()) checkpoint = default_checkpoint(config);
      const int n = cmd_translate(config, checkpoint, input_dir, out_dir,
                                  from == "source" ? Side::kSource : Side::kTarget);
      std::cout << "wrote " << n << " grids to " << out_dir << "\n";
    } else if (ev->parsed()) {
      if (checkpoint.empty()) checkpoint = default_checkpoint(config);
      if (out_dir.empty()) out_dir = (fs::path(config.run_dir()) / "eval").string();
      const EvaluationReport r = cmd_evaluate(config, checkpoint, out_dir);
      for (const auto& row : r.rows)
        std::cout << row.metric << (row.metric == "cmc" ? "@" + std::to_string(row.k) : "") << " = " << row.value
                  << "\n";
      if (r.excluded_queries > 0) std::cout << "excluded queries: " << r.excluded_queries << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace edaan
