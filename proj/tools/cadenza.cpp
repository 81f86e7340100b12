// cadenza: command-line front end. Every subcommand writes run_manifest.json
// next to its outputs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cadenza/checkpoint.hpp"
#include "cadenza/dataio.hpp"
#include "cadenza/error.hpp"
#include "cadenza/eval.hpp"
#include "cadenza/probe.hpp"
#include "cadenza/reports.hpp"
#include "cadenza/rng.hpp"
#include "cadenza/sampling.hpp"
#include "cadenza/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cadenza;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  bool dry_run = false;
};

struct Run {
  std::string command;
  json config = json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path);
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw Error(ErrorKind::Config, path + ": config must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

void write_manifest_file(const fs::path& out_dir, const Run& run, double wall_s, bool dry_run) {
  json inputs = json::object(), outputs = json::object();
  for (const auto& p : run.inputs) inputs[p] = sha256_file(p);
  for (const auto& p : run.outputs) outputs[p] = sha256_file(p);
  json m = {{"command", run.command}, {"config", run.config}, {"seed", run.seed},
            {"inputs", inputs},       {"outputs", outputs},   {"dry_run", dry_run},
            {"wall_time_s", wall_s}};
  fs::create_directories(out_dir);
  write_text(out_dir / "run_manifest.json", m.dump(2) + "\n");
}

// Dataset inputs: --data <dir> or the three explicit paths.
struct DataArgs {
  std::string dir, audio, video, manifest;

  DatasetPaths paths() const {
    DatasetPaths p = dir.empty() ? DatasetPaths{} : DatasetPaths::in(dir);
    if (!audio.empty()) p.audio = audio;
    if (!video.empty()) p.video = video;
    if (!manifest.empty()) p.manifest = manifest;
    if (p.audio.empty() || p.video.empty() || p.manifest.empty()) {
      throw Error(ErrorKind::Config, "dataset needs --data or all of --audio, --video, --manifest");
    }
    return p;
  }
};

void add_data_options(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--data", d.dir, "Dataset directory (audio.mveb, video.mveb, manifest.jsonl)");
  cmd->add_option("--audio", d.audio, "Audio embedding file");
  cmd->add_option("--video", d.video, "Video embedding file");
  cmd->add_option("--manifest", d.manifest, "Manifest (JSON lines)");
}

PairedDataset load_dataset(const DataArgs& args, Run& run) {
  const auto p = args.paths();
  for (const auto& f : {p.audio, p.video}) {
    run.inputs.push_back(f.string());
    run.inputs.push_back(ids_sidecar_path(f).string());
  }
  run.inputs.push_back(p.manifest.string());
  return assemble_dataset(p);
}

DualHeads load_heads(const std::string& path, Run& run) {
  if (path.empty()) throw Error(ErrorKind::Config, "--checkpoint is required");
  run.inputs.push_back(path);
  return heads_from_checkpoint(read_checkpoint(path));
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file");
  cmd->add_option("--seed", c.seed, "Root seed (u64)");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_flag("--dry-run", c.dry_run, "Validate inputs and print the resolved config");
}

// ---- synth

void apply_synth_json(const json& j, SynthSpec& s) {
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "n_videos") s.n_videos = v.get<std::size_t>();
      else if (key == "segments_per_video") s.segments_per_video = v.get<std::size_t>();
      else if (key == "latent_dim") s.latent_dim = v.get<std::size_t>();
      else if (key == "audio_dim") s.audio_dim = v.get<std::size_t>();
      else if (key == "video_dim") s.video_dim = v.get<std::size_t>();
      else if (key == "cross_modal_correlation" || key == "rho") s.cross_modal_correlation = v.get<double>();
      else if (key == "noise_sigma") s.noise_sigma = v.get<double>();
      else if (key == "segment_jitter") s.segment_jitter = v.get<double>();
      else if (key == "n_genres") s.n_genres = v.get<std::size_t>();
      else if (key == "n_tags") s.n_tags = v.get<std::size_t>();
      else if (key == "train_fraction") s.splits.train = v.get<double>();
      else if (key == "val_fraction") s.splits.val = v.get<double>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else throw Error(ErrorKind::Config, "unknown synth key '" + key + "'");
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Config, "synth key '" + key + "': " + e.what());
    }
  }
}

json synth_json(const SynthSpec& s) {
  return {{"n_videos", s.n_videos},
          {"segments_per_video", s.segments_per_video},
          {"latent_dim", s.latent_dim},
          {"audio_dim", s.audio_dim},
          {"video_dim", s.video_dim},
          {"cross_modal_correlation", s.cross_modal_correlation},
          {"noise_sigma", s.noise_sigma},
          {"segment_jitter", s.segment_jitter},
          {"n_genres", s.n_genres},
          {"n_tags", s.n_tags},
          {"train_fraction", s.splits.train},
          {"val_fraction", s.splits.val},
          {"seed", s.seed}};
}

void cmd_synth(const Common& c, Run& run) {
  SynthSpec spec;
  if (!c.config_path.empty()) run.inputs.push_back(c.config_path);
  apply_synth_json(load_config(c.config_path), spec);
  if (c.seed) spec.seed = *c.seed;
  spec.validate();
  run.config = synth_json(spec);
  run.seed = spec.seed;
  if (c.dry_run) return;

  const auto ds = generate_synthetic(spec);
  write_dataset(ds, c.out);
  const auto paths = DatasetPaths::in(c.out);
  const auto back = assemble_dataset(paths);
  if (back.size() != spec.n_videos * spec.segments_per_video) {
    throw Error(ErrorKind::Validation, "written dataset has the wrong row count");
  }
  for (const auto& f : {paths.audio, paths.video}) {
    run.outputs.push_back(f.string());
    run.outputs.push_back(ids_sidecar_path(f).string());
  }
  run.outputs.push_back(paths.manifest.string());
  fmt::print("wrote {} segments ({} videos) to {}\n", back.size(), spec.n_videos, c.out);
}

// ---- train

const std::set<std::string> kModelKeys = {"audio_in", "video_in", "hidden",       "embed", "n_layers",
                                          "head_mode", "tau",     "negative_set", "init",  "dropout"};

void cmd_train(const Common& c, Run& run, const DataArgs& data, const std::string& variant,
               const std::string& negative_set) {
  const auto ds = load_dataset(data, run);
  if (!c.config_path.empty()) run.inputs.push_back(c.config_path);
  const json cfg = load_config(c.config_path);
  json model_part = json::object(), train_part = json::object();
  for (const auto& [key, v] : cfg.items()) (kModelKeys.count(key) ? model_part : train_part)[key] = v;

  ModelConfig model = variant_config(variant);
  model.audio_in = ds.audio.dim;
  model.video_in = ds.video.dim;
  apply_json(model_part, model);
  if (model.audio_in != ds.audio.dim || model.video_in != ds.video.dim) {
    throw Error(ErrorKind::Config, fmt::format("config audio_in/video_in {}/{} disagree with the dataset {}/{}",
                                               model.audio_in, model.video_in, ds.audio.dim, ds.video.dim));
  }
  if (!negative_set.empty()) model.negative_set = parse_negative_set(negative_set);
  TrainConfig train;
  apply_json(train_part, train);
  if (c.seed) train.seed = *c.seed;
  model.validate();
  train.validate();
  run.seed = train.seed;
  run.config = {{"variant", variant}, {"model", to_json(model)}, {"train", to_json(train)}};
  if (c.dry_run) return;

  const auto result = train_contrastive(ds, model, train);
  fs::create_directories(c.out);
  const auto ck_path = fs::path(c.out) / "checkpoint.mvck";
  const auto hist_path = fs::path(c.out) / "history.csv";
  write_checkpoint(to_checkpoint(result.heads), ck_path);
  write_text(hist_path, result.history.to_csv());
  heads_from_checkpoint(read_checkpoint(ck_path));
  run.outputs = {ck_path.string(), hist_path.string()};
  const auto& h = result.history;
  fmt::print("trained {} epochs; best epoch {} val loss {:.6f}{}\n", h.epochs.size() - 1, h.best_epoch,
             h.best_val_loss, h.early_stopped ? " (early stop)" : "");
}

// ---- eval-retrieval

std::optional<Split> parse_split_arg(const std::string& s) {
  if (s == "all") return std::nullopt;
  return parse_split(s);
}

std::vector<std::size_t> split_rows(const PairedDataset& ds, const std::optional<Split>& split) {
  if (split) return ds.rows_in(*split);
  std::vector<std::size_t> rows(ds.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

void cmd_eval_retrieval(const Common& c, Run& run, const DataArgs& data, const std::string& checkpoint,
                        const std::string& split_name) {
  const auto ds = load_dataset(data, run);
  const auto heads = load_heads(checkpoint, run);
  const auto split = parse_split_arg(split_name);
  const auto rows = split_rows(ds, split);
  if (rows.empty()) throw Error(ErrorKind::Validation, "split '" + split_name + "' is empty");
  run.config = {{"split", split_name}, {"model", to_json(heads.config)}};
  if (c.dry_run) return;

  const auto audio = embed_dataset(heads, take_rows(ds.audio, rows), Modality::Audio);
  const auto video = embed_dataset(heads, take_rows(ds.video, rows), Modality::Video);
  const auto a2v = median_rank(audio, video, RetrievalDirection::AudioToVideo);
  const auto v2a = median_rank(video, audio, RetrievalDirection::VideoToAudio);
  fs::create_directories(c.out);
  const auto jp = fs::path(c.out) / "median_rank.json", tp = fs::path(c.out) / "median_rank.txt";
  write_text(jp, rank_report_json(a2v, v2a).dump(2) + "\n");
  const auto text = rank_report_text(a2v, v2a);
  write_text(tp, text);
  run.outputs = {jp.string(), tp.string()};
  fmt::print("{}", text);
}

// ---- probe

void cmd_probe(const Common& c, Run& run, const DataArgs& data, const std::string& checkpoint,
               const std::string& source_name, const std::string& task_name) {
  const auto ds = load_dataset(data, run);
  const auto source = parse_feature_source(source_name);
  const auto task = parse_probe_task(task_name);
  std::optional<DualHeads> heads;
  if (needs_heads(source)) heads = load_heads(checkpoint, run);
  if (!c.config_path.empty()) run.inputs.push_back(c.config_path);
  ProbeConfig cfg;
  apply_json(load_config(c.config_path), cfg);
  if (c.seed) cfg.train.seed = *c.seed;
  cfg.train.validate();
  const auto labels = build_labels(ds, task, cfg.top_k);
  run.seed = cfg.train.seed;
  run.config = {{"source", source_name}, {"task", task_name}, {"probe", to_json(cfg)}, {"labels", labels.names}};
  if (c.dry_run) return;

  const auto features = build_features(ds, source, heads ? &*heads : nullptr);
  const auto result = run_probe(ds, features, labels, task, cfg);
  fs::create_directories(c.out);
  const auto jp = fs::path(c.out) / "probe.json", tp = fs::path(c.out) / "probe.txt",
             hp = fs::path(c.out) / "probe_history.csv";
  json report = probe_report_json(result.metrics);
  report["source"] = source_name;
  report["task"] = task_name;
  report["feature_dim"] = result.feature_dim;
  report["test_videos"] = result.test_videos;
  write_text(jp, report.dump(2) + "\n");
  const auto text = fmt::format("source {}  task {}  feature_dim {}  test_videos {}\n", source_name, task_name,
                                result.feature_dim, result.test_videos) +
                    probe_report_text(result.metrics);
  write_text(tp, text);
  write_text(hp, result.result.history.to_csv());
  run.outputs = {jp.string(), tp.string(), hp.string()};
  fmt::print("{}", text);
}

// ---- retrieve / analyze share the embedding choice

enum class View { Audio, Video, Multimodal };

View parse_view(const std::string& s) {
  if (s == "audio") return View::Audio;
  if (s == "video") return View::Video;
  if (s == "multimodal") return View::Multimodal;
  throw Error(ErrorKind::Config, "unknown modality '" + s + "'");
}

EmbeddingTable normalized(const EmbeddingTable& t) {
  EmbeddingTable out = t;
  for (std::size_t r = 0; r < out.count(); ++r) {
    auto row = out.row(r);
    double s = 0.0;
    for (float x : row) s += double(x) * double(x);
    if (s == 0.0) throw Error(ErrorKind::Validation, "zero embedding for " + to_string(out.ids[r]));
    const double inv = 1.0 / std::sqrt(s);
    for (float& x : row) x = static_cast<float>(x * inv);
  }
  return out;
}

// Segment-level embeddings for the requested view; heads are optional (raw
// backbone features otherwise).
EmbeddingTable view_segments(const PairedDataset& ds, const DualHeads* heads, View view) {
  auto audio = [&] { return heads ? embed_dataset(*heads, ds.audio, Modality::Audio) : ds.audio; };
  auto video = [&] { return heads ? embed_dataset(*heads, ds.video, Modality::Video) : ds.video; };
  if (view == View::Audio) return audio();
  if (view == View::Video) return video();
  const auto a = normalized(audio()), v = normalized(video());
  EmbeddingTable out;
  out.dim = a.dim + v.dim;
  out.ids = a.ids;
  for (std::size_t r = 0; r < a.count(); ++r) {
    out.data.insert(out.data.end(), a.row(r).begin(), a.row(r).end());
    out.data.insert(out.data.end(), v.row(r).begin(), v.row(r).end());
  }
  return out;
}

std::vector<TrackEmbedding> view_tracks(const PairedDataset& ds, const DualHeads* heads, View view) {
  auto audio = [&] { return aggregate_tracks(heads ? embed_dataset(*heads, ds.audio, Modality::Audio) : ds.audio); };
  auto video = [&] { return aggregate_tracks(heads ? embed_dataset(*heads, ds.video, Modality::Video) : ds.video); };
  if (view == View::Audio) return audio();
  if (view == View::Video) return video();
  return aggregate_multimodal(audio(), video());
}

PairedDataset subset(const PairedDataset& ds, const std::vector<std::size_t>& rows) {
  PairedDataset out;
  out.audio = take_rows(ds.audio, rows);
  out.video = take_rows(ds.video, rows);
  for (auto r : rows) out.manifest.entries.push_back(ds.manifest.entries[r]);
  return out;
}

std::vector<std::string> read_seed_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open seeds file " + path);
  std::vector<std::string> seeds;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) seeds.push_back(line);
  }
  return seeds;
}

void cmd_retrieve(const Common& c, Run& run, const DataArgs& data, const std::string& checkpoint,
                  const std::string& level_name, std::optional<std::size_t> k, const std::string& seeds_file,
                  std::optional<std::size_t> n_random, const std::string& view_name, const std::string& split_name) {
  const auto full = load_dataset(data, run);
  std::optional<DualHeads> heads;
  if (!checkpoint.empty()) heads = load_heads(checkpoint, run);
  const RetrievalLevel level = level_name == "segment" ? RetrievalLevel::Segment : RetrievalLevel::Track;
  if (level_name != "segment" && level_name != "track") {
    throw Error(ErrorKind::Config, "unknown level '" + level_name + "'");
  }
  const auto view = parse_view(view_name);
  const std::size_t kk = k.value_or(3);
  const std::size_t n = n_random.value_or(level == RetrievalLevel::Track ? 25 : 20);
  const std::uint64_t seed = c.seed.value_or(0);
  run.seed = seed;
  run.config = {{"level", level_name}, {"k", kk},          {"modality", view_name},
                {"split", split_name}, {"embeddings", heads ? "contrastive" : "backbone"}};
  if (seeds_file.empty()) run.config["random_seeds"] = n;
  else run.inputs.push_back(seeds_file);
  const auto ds = subset(full, split_rows(full, parse_split_arg(split_name)));
  if (c.dry_run) return;

  const auto pool = level == RetrievalLevel::Segment ? make_segment_pool(view_segments(ds, heads ? &*heads : nullptr, view))
                                                     : make_track_pool(view_tracks(ds, heads ? &*heads : nullptr, view));
  const auto seeds = seeds_file.empty() ? pick_random_seeds(pool, n, seed) : read_seed_file(seeds_file);
  const auto report = retrieve_topk(pool, seeds, kk, level);
  fs::create_directories(c.out);
  const auto jp = fs::path(c.out) / "retrieval.json", tp = fs::path(c.out) / "retrieval.txt";
  write_text(jp, retrieval_report_json(report).dump(2) + "\n");
  const auto text = retrieval_report_text(report);
  write_text(tp, text);
  run.outputs = {jp.string(), tp.string()};
  fmt::print("{}", text);
}

void cmd_analyze(const Common& c, Run& run, const DataArgs& data, const std::string& checkpoint,
                 const std::string& grouping_name, const std::string& view_name, const std::string& split_name) {
  const auto full = load_dataset(data, run);
  std::optional<DualHeads> heads;
  if (!checkpoint.empty()) heads = load_heads(checkpoint, run);
  Grouping grouping;
  if (grouping_name == "same_song" || grouping_name == "same-song") grouping = Grouping::SameSong;
  else if (grouping_name == "same_genre" || grouping_name == "same-genre") grouping = Grouping::SameGenre;
  else throw Error(ErrorKind::Config, "unknown grouping '" + grouping_name + "'");
  const auto view = parse_view(view_name);
  if (view == View::Multimodal) throw Error(ErrorKind::Config, "analyze works on one modality at a time");

  ContrastOptions opts;
  if (!c.config_path.empty()) run.inputs.push_back(c.config_path);
  const auto cfg = load_config(c.config_path);
  for (const auto& [key, v] : cfg.items()) {
    try {
      if (key == "bootstrap_reps") opts.bootstrap_reps = v.get<std::size_t>();
      else if (key == "confidence") opts.confidence = v.get<double>();
      else if (key == "seed") opts.seed = v.get<std::uint64_t>();
      else throw Error(ErrorKind::Config, "unknown analyze key '" + key + "'");
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Config, "analyze key '" + key + "': " + e.what());
    }
  }
  if (c.seed) opts.seed = *c.seed;
  run.seed = opts.seed;
  run.config = {{"grouping", to_string(grouping)},        {"modality", view_name},
                {"split", split_name},                    {"bootstrap_reps", opts.bootstrap_reps},
                {"confidence", opts.confidence},          {"embeddings", heads ? "contrastive" : "backbone"}};
  const auto ds = subset(full, split_rows(full, parse_split_arg(split_name)));
  if (c.dry_run) return;

  const auto report =
      similarity_contrast(view_segments(ds, heads ? &*heads : nullptr, view), ds.manifest, grouping, opts);
  fs::create_directories(c.out);
  const auto jp = fs::path(c.out) / "contrast.json", tp = fs::path(c.out) / "contrast.txt";
  write_text(jp, contrast_report_json(report).dump(2) + "\n");
  const auto text = contrast_report_text(report);
  write_text(tp, text);
  run.outputs = {jp.string(), tp.string()};
  fmt::print("{}", text);
}

// ---- plan: sampling plans for an external extractor

void cmd_plan(const Common& c, Run& run, const std::string& manifest_path) {
  if (manifest_path.empty()) throw Error(ErrorKind::Config, "--manifest is required");
  run.inputs.push_back(manifest_path);
  const auto manifest = read_manifest(manifest_path);
  TrackPlanOptions opts;
  if (!c.config_path.empty()) run.inputs.push_back(c.config_path);
  const auto cfg = load_config(c.config_path);
  for (const auto& [key, v] : cfg.items()) {
    try {
      if (key == "n_sections") opts.n_sections = v.get<std::size_t>();
      else if (key == "seg_len_s") opts.seg_len_s = v.get<double>();
      else if (key == "n_frames") opts.n_frames = v.get<std::size_t>();
      else if (key == "short_side") opts.short_side = v.get<std::uint32_t>();
      else throw Error(ErrorKind::Config, "unknown plan key '" + key + "'");
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Config, "plan key '" + key + "': " + e.what());
    }
  }
  const std::uint64_t seed = c.seed.value_or(0);
  run.seed = seed;
  run.config = {{"n_sections", opts.n_sections},
                {"seg_len_s", opts.seg_len_s},
                {"n_frames", opts.n_frames},
                {"short_side", opts.short_side}};
  std::map<std::string, double> durations;
  for (const auto& e : manifest.entries) {
    if (!e.duration_s) throw Error(ErrorKind::Validation, "manifest entry " + to_string(e.id()) + " has no duration_s");
    durations.emplace(e.video_id, *e.duration_s);
  }
  if (c.dry_run) return;

  std::string out;
  std::uint64_t index = 0;
  for (const auto& [video, duration] : durations) {
    out += to_json(plan_track(video, duration, derive_seed(seed, streams::kPlan, index++), opts)) + "\n";
  }
  fs::create_directories(c.out);
  const auto path = fs::path(c.out) / "plans.jsonl";
  write_text(path, out);
  run.outputs = {path.string()};
  fmt::print("planned {} tracks\n", durations.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive audio-video embedding toolkit"};
  app.require_subcommand(1);

  Common common;
  DataArgs data;
  std::string checkpoint, variant = "base", negative_set, task = "tags", source, level = "track",
                          seeds_file, grouping = "same_song", view = "multimodal", split = "test", manifest;
  std::optional<std::size_t> k, n_random;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic paired dataset");
  add_common(synth, common);

  auto* train = app.add_subcommand("train", "Train contrastive projection heads");
  add_common(train, common);
  add_data_options(train, data);
  train->add_option("--variant", variant, "base|embed512|four-layers|single-head|tau03|ae-init");
  train->add_option("--negative-set", negative_set, "standard|paper-literal");

  auto* eval = app.add_subcommand("eval-retrieval", "Cross-modal median rank on a split");
  add_common(eval, common);
  add_data_options(eval, data);
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--split", split, "train|val|test|all");

  auto* probe = app.add_subcommand("probe", "Train and score a tag or genre probe");
  add_common(probe, common);
  add_data_options(probe, data);
  probe->add_option("--source", source,
                    "contrastive-audio|contrastive-video|contrastive-agg|backbone-audio|backbone-video|backbone-concat")
      ->required();
  probe->add_option("--task", task, "tags|genre");
  probe->add_option("--checkpoint", checkpoint);

  auto* retrieve = app.add_subcommand("retrieve", "Top-k similarity retrieval for seed items");
  add_common(retrieve, common);
  add_data_options(retrieve, data);
  retrieve->add_option("--checkpoint", checkpoint, "Embed with trained heads (backbone features otherwise)");
  retrieve->add_option("--level", level, "segment|track");
  retrieve->add_option("--k", k, "Neighbours per seed (default 3)");
  auto* seeds_opt = retrieve->add_option("--seeds", seeds_file, "File with one seed id per line");
  retrieve->add_option("--random-seeds", n_random, "Number of random seeds (default 25 track, 20 segment)")
      ->excludes(seeds_opt);
  retrieve->add_option("--modality", view, "audio|video|multimodal");
  retrieve->add_option("--split", split, "train|val|test|all");

  auto* analyze = app.add_subcommand("analyze", "Within- vs between-group cosine similarity");
  add_common(analyze, common);
  add_data_options(analyze, data);
  analyze->add_option("--checkpoint", checkpoint, "Embed with trained heads (backbone features otherwise)");
  analyze->add_option("--grouping", grouping, "same_song|same_genre");
  analyze->add_option("--modality", view, "audio|video")->default_str("audio");
  analyze->add_option("--split", split, "train|val|test|all");

  auto* plan = app.add_subcommand("plan", "Export segment/frame/crop sampling plans as JSON lines");
  add_common(plan, common);
  plan->add_option("--manifest", manifest)->required();

  CLI11_PARSE(app, argc, argv);

  Run run;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (synth->parsed()) {
      run.command = "synth";
      cmd_synth(common, run);
    } else if (train->parsed()) {
      run.command = "train";
      cmd_train(common, run, data, variant, negative_set);
    } else if (eval->parsed()) {
      run.command = "eval-retrieval";
      cmd_eval_retrieval(common, run, data, checkpoint, split);
    } else if (probe->parsed()) {
      run.command = "probe";
      cmd_probe(common, run, data, checkpoint, source, task);
    } else if (retrieve->parsed()) {
      run.command = "retrieve";
      cmd_retrieve(common, run, data, checkpoint, level, k, seeds_file, n_random, view, split);
    } else if (analyze->parsed()) {
      run.command = "analyze";
      if (analyze->count("--modality") == 0) view = "audio";
      cmd_analyze(common, run, data, checkpoint, grouping, view, split);
    } else if (plan->parsed()) {
      run.command = "plan";
      cmd_plan(common, run, manifest);
    }
    if (common.dry_run) fmt::print("{}\n", run.config.dump(2));
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest_file(common.out, run, wall, common.dry_run);
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
