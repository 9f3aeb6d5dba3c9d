#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "myops/augment.hpp"
#include "myops/blocks.hpp"
#include "myops/common.hpp"
#include "myops/container.hpp"
#include "myops/gradcheck.hpp"
#include "myops/inference.hpp"
#include "myops/metrics.hpp"
#include "myops/phantom.hpp"
#include "myops/preprocess.hpp"
#include "myops/trainer.hpp"
#include "myops/volume.hpp"

#include "json.hpp"

namespace myops {

namespace fs = std::filesystem;

struct PipelineConfig {
  std::string data_dir = "data";
  std::string work_dir = "work";
  int crop_size = 256;
  int warps_per_slice = 20;
  uint64_t seed = 42;

  int epochs = 500;
  double lr = 1e-5;
  int batch_size = 8;
  double val_fraction = 0.2;
  std::string arch = "unet";
  int depth = 2;
  int base_channels = 32;
  bool per_sample_loss = false;
  std::vector<std::string> members = {"unet", "unetpp", "unet"};

  bool empty_empty_is_one = true;
  int holdout_cases = 0;

  int n_cases = 10;
  int size = 64;
  int slices_per_case = 3;

  int block_filter = -1;  // train just this block when >= 0
};

// The small-footprint preset: everything shrinks so the whole chain runs in
// minutes on a laptop CPU.
inline void apply_desk_scale(PipelineConfig& cfg) {
  cfg.crop_size = 64;
  cfg.warps_per_slice = 5;
  cfg.epochs = 30;
  cfg.lr = 1e-3;
  cfg.base_channels = 4;
  cfg.holdout_cases = 4;
  cfg.n_cases = 10;
  cfg.size = 64;
}

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(unquote(trim(item)));
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_num(const std::string& key, const std::string& val) {
  std::stringstream ss(val);
  T x;
  ss >> x;
  if (ss.fail() || !ss.eof()) fail(Err::ConfigError, "bad value for " + key + ": " + val);
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& val) {
  if (val == "true") return true;
  if (val == "false") return false;
  fail(Err::ConfigError, "bad boolean for " + key + ": " + val);
}

}  // namespace detail

// Flat key = value file, TOML-style: # comments, quoted strings, booleans,
// comma lists. Section headers are not used and rejected, as are unknown
// keys.
inline PipelineConfig load_config_text(const std::string& text) {
  PipelineConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[')
      fail(Err::ConfigError, "sections are not supported (line " + std::to_string(lineno) + ")");
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(Err::ConfigError, "expected key = value at line " + std::to_string(lineno));
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::unquote(detail::trim(line.substr(eq + 1)));

    if (key == "data_dir") cfg.data_dir = val;
    else if (key == "work_dir") cfg.work_dir = val;
    else if (key == "crop_size") cfg.crop_size = detail::parse_num<int>(key, val);
    else if (key == "warps_per_slice") cfg.warps_per_slice = detail::parse_num<int>(key, val);
    else if (key == "seed") cfg.seed = detail::parse_num<uint64_t>(key, val);
    else if (key == "epochs") cfg.epochs = detail::parse_num<int>(key, val);
    else if (key == "lr") cfg.lr = detail::parse_num<double>(key, val);
    else if (key == "batch_size") cfg.batch_size = detail::parse_num<int>(key, val);
    else if (key == "val_fraction") cfg.val_fraction = detail::parse_num<double>(key, val);
    else if (key == "arch") cfg.arch = val;
    else if (key == "depth") cfg.depth = detail::parse_num<int>(key, val);
    else if (key == "base_channels") cfg.base_channels = detail::parse_num<int>(key, val);
    else if (key == "per_sample_loss") cfg.per_sample_loss = detail::parse_bool(key, val);
    else if (key == "members") cfg.members = detail::split_csv(val);
    else if (key == "empty_empty_is_one") cfg.empty_empty_is_one = detail::parse_bool(key, val);
    else if (key == "holdout_cases") cfg.holdout_cases = detail::parse_num<int>(key, val);
    else if (key == "n_cases") cfg.n_cases = detail::parse_num<int>(key, val);
    else if (key == "size") cfg.size = detail::parse_num<int>(key, val);
    else if (key == "slices_per_case") cfg.slices_per_case = detail::parse_num<int>(key, val);
    else fail(Err::ConfigError, "unknown config key: " + key);
  }
  arch_from_name(cfg.arch);
  for (const std::string& m : cfg.members) arch_from_name(m);
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Err::ConfigError, "cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str());
}

// ---- stage addressing ----------------------------------------------------

inline std::string hash8(const std::string& canonical) {
  const uint64_t h = fnv1a(canonical);
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", static_cast<uint32_t>(h ^ (h >> 32)));
  return buf;
}

inline std::vector<std::string> list_cases(const fs::path& data_dir) {
  require(fs::is_directory(data_dir), Err::StageFailure,
          "data directory missing: " + data_dir.string());
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(data_dir))
    if (e.is_directory() && fs::exists(e.path() / "labels.nii")) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  require(!names.empty(), Err::StageFailure, "no cases under " + data_dir.string());
  return names;
}

// Last holdout_cases of the sorted listing are reserved for evaluation; an
// empty reservation evaluates on everything.
inline std::pair<std::vector<std::string>, std::vector<std::string>> split_cases(
    const std::vector<std::string>& names, int holdout) {
  require(holdout >= 0 && holdout < static_cast<int>(names.size()), Err::ConfigError,
          "holdout_cases must leave at least one training case");
  std::vector<std::string> train(names.begin(), names.end() - holdout);
  std::vector<std::string> eval(names.end() - holdout, names.end());
  if (eval.empty()) eval = names;
  return {std::move(train), std::move(eval)};
}

inline std::string augment_canonical(const PipelineConfig& cfg,
                                     const std::vector<std::string>& names) {
  std::string s = "augment|crop=" + std::to_string(cfg.crop_size) +
                  "|warps=" + std::to_string(cfg.warps_per_slice) +
                  "|seed=" + std::to_string(cfg.seed) +
                  "|holdout=" + std::to_string(cfg.holdout_cases) + "|cases=";
  for (const std::string& n : names) s += n + ",";
  return s;
}

inline std::string train_canonical(const PipelineConfig& cfg, const std::string& augment_hash) {
  std::string s = "train|" + augment_hash + "|arch=" + cfg.arch +
                  "|depth=" + std::to_string(cfg.depth) +
                  "|base=" + std::to_string(cfg.base_channels) +
                  "|epochs=" + std::to_string(cfg.epochs) + "|lr=" + std::to_string(cfg.lr) +
                  "|batch=" + std::to_string(cfg.batch_size) +
                  "|val=" + std::to_string(cfg.val_fraction) +
                  "|persample=" + (cfg.per_sample_loss ? "1" : "0") +
                  "|seed=" + std::to_string(cfg.seed) + "|members=";
  for (const std::string& m : cfg.members) s += m + ",";
  return s;
}

struct StagePaths {
  std::string augment_hash, train_hash, predict_hash, evaluate_hash;
  fs::path augment_dir, train_dir, predict_dir, evaluate_dir;
};

inline StagePaths stage_paths(const PipelineConfig& cfg) {
  const std::vector<std::string> names = list_cases(cfg.data_dir);
  StagePaths p;
  p.augment_hash = hash8(augment_canonical(cfg, names));
  p.train_hash = hash8(train_canonical(cfg, p.augment_hash));
  p.predict_hash = hash8("predict|" + p.train_hash);
  p.evaluate_hash = hash8("evaluate|" + p.predict_hash +
                          "|ee1=" + (cfg.empty_empty_is_one ? "1" : "0"));
  const fs::path work(cfg.work_dir);
  p.augment_dir = work / ("augment-" + p.augment_hash);
  p.train_dir = work / ("train-" + p.train_hash);
  p.predict_dir = work / ("predict-" + p.predict_hash);
  p.evaluate_dir = work / ("evaluate-" + p.evaluate_hash);
  return p;
}

// ---- dataset on disk -----------------------------------------------------

inline void save_case(const fs::path& case_dir, const CaseData& c) {
  fs::create_directories(case_dir);
  const char* names[3] = {"bssfp.nii", "lge.nii", "t2.nii"};
  for (int s = 0; s < 3; ++s) save_nifti(case_dir / names[s], c.images[static_cast<size_t>(s)]);
  save_nifti(case_dir / "labels.nii", c.labels);
}

inline CaseData load_case(const fs::path& case_dir) {
  CaseData c;
  const char* names[3] = {"bssfp.nii", "lge.nii", "t2.nii"};
  for (int s = 0; s < 3; ++s) c.images[static_cast<size_t>(s)] = load_nifti((case_dir / names[s]).string());
  c.labels = as_labels(load_nifti((case_dir / "labels.nii").string()));
  return c;
}

inline void run_synth(const PipelineConfig& cfg) {
  require(cfg.n_cases >= 1, Err::ConfigError, "n_cases must be >= 1");
  require(cfg.size >= 32, Err::ConfigError, "size must be >= 32");
  const std::vector<CaseData> cases =
      make_phantom_dataset(cfg.n_cases, cfg.size, cfg.slices_per_case, cfg.seed);
  for (int i = 0; i < cfg.n_cases; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "case%02d", i);
    save_case(fs::path(cfg.data_dir) / name, cases[static_cast<size_t>(i)]);
  }
  std::printf("synth: wrote %d cases (%dx%dx%d) to %s\n", cfg.n_cases, cfg.size, cfg.size,
              cfg.slices_per_case, cfg.data_dir.c_str());
}

// Foreign layout: files <case>_<tag>.nii with tags C0 (cine), DE (late
// enhancement), T2, gd (labels). Rewritten into the canonical per-case
// directory layout.
inline void run_convert(const PipelineConfig& cfg, const std::string& src_dir) {
  require(fs::is_directory(src_dir), Err::StageFailure, "source directory missing: " + src_dir);
  std::map<std::string, std::map<std::string, fs::path>> groups;
  for (const auto& e : fs::directory_iterator(src_dir)) {
    if (!e.is_regular_file()) continue;
    const std::string stem = e.path().stem().string();
    const size_t us = stem.rfind('_');
    if (us == std::string::npos) continue;
    groups[stem.substr(0, us)][stem.substr(us + 1)] = e.path();
  }
  int written = 0;
  for (const auto& [name, files] : groups) {
    const char* want[3] = {"C0", "DE", "T2"};
    const char* out_names[3] = {"bssfp.nii", "lge.nii", "t2.nii"};
    bool complete = true;
    for (const char* tag : want) complete = complete && files.count(tag) > 0;
    if (!complete || files.count("gd") == 0) continue;
    const fs::path case_dir = fs::path(cfg.data_dir) / name;
    fs::create_directories(case_dir);
    for (int s = 0; s < 3; ++s)
      save_nifti(case_dir / out_names[s], load_nifti(files.at(want[s])));
    save_nifti(case_dir / "labels.nii", as_labels(load_nifti(files.at("gd"))));
    ++written;
  }
  require(written > 0, Err::StageFailure, "no complete cases found under " + src_dir);
  std::printf("convert: wrote %d cases to %s\n", written, cfg.data_dir.c_str());
}

inline void save_dataset(const fs::path& path, const std::vector<SliceSample>& samples,
                         const nlohmann::json& meta) {
  std::vector<Record> recs;
  const std::string meta_text = meta.dump();
  recs.push_back(make_record_u8("meta", {meta_text.size()},
                                std::vector<uint8_t>(meta_text.begin(), meta_text.end())));
  for (size_t i = 0; i < samples.size(); ++i) {
    const SliceSample& s = samples[i];
    const std::string base = "s" + std::to_string(i);
    for (int k = 0; k < 3; ++k) {
      const GridF& g = s.images[static_cast<size_t>(k)];
      recs.push_back(make_record_f64(base + ".img" + std::to_string(k),
                                     {static_cast<uint64_t>(g.rows), static_cast<uint64_t>(g.cols)},
                                     g.v));
    }
    for (int k = 0; k < 5; ++k) {
      const GridF& g = s.masks[static_cast<size_t>(k)];
      std::vector<uint8_t> bytes(g.v.size());
      for (size_t j = 0; j < bytes.size(); ++j) bytes[j] = g.v[j] != 0.0 ? 1 : 0;
      recs.push_back(make_record_u8(base + ".mask" + std::to_string(k),
                                    {static_cast<uint64_t>(g.rows), static_cast<uint64_t>(g.cols)},
                                    bytes));
    }
  }
  write_bytes(path.string(), write_container(recs));
}

inline std::vector<SliceSample> load_dataset(const fs::path& path) {
  require(fs::exists(path), Err::StageFailure,
          "dataset missing at " + path.string() + "; run `myops augment` first");
  const std::vector<Record> recs = read_container(read_bytes(path.string()));
  const Record& meta_rec = get_record(recs, "meta");
  const nlohmann::json meta =
      nlohmann::json::parse(std::string(meta_rec.payload.begin(), meta_rec.payload.end()));
  const size_t count = meta.at("count").get<size_t>();
  std::vector<SliceSample> out(count);
  for (size_t i = 0; i < count; ++i) {
    const std::string base = "s" + std::to_string(i);
    SliceSample& s = out[i];
    s.case_id = "aug";
    s.slice_index = static_cast<int>(i);
    for (int k = 0; k < 3; ++k) {
      const Record& r = get_record(recs, base + ".img" + std::to_string(k));
      require(r.dims.size() == 2, Err::DimMismatch, "image record must be rank 2");
      GridF g(static_cast<int>(r.dims[0]), static_cast<int>(r.dims[1]));
      g.v = record_as_f64(r);
      s.images[static_cast<size_t>(k)] = std::move(g);
    }
    for (int k = 0; k < 5; ++k) {
      const Record& r = get_record(recs, base + ".mask" + std::to_string(k));
      require(r.dims.size() == 2, Err::DimMismatch, "mask record must be rank 2");
      GridF g(static_cast<int>(r.dims[0]), static_cast<int>(r.dims[1]));
      for (size_t j = 0; j < g.v.size(); ++j) g.v[j] = r.payload[j] != 0 ? 1.0 : 0.0;
      s.masks[static_cast<size_t>(k)] = std::move(g);
    }
  }
  return out;
}

inline void run_augment(const PipelineConfig& cfg) {
  const std::vector<std::string> names = list_cases(cfg.data_dir);
  const auto [train_names, eval_names] = split_cases(names, cfg.holdout_cases);
  const StagePaths paths = stage_paths(cfg);
  fs::create_directories(paths.augment_dir);

  std::vector<SliceSample> slices;
  for (const std::string& name : train_names) {
    const CaseData c = load_case(fs::path(cfg.data_dir) / name);
    std::vector<SliceSample> s = extract_slices(c.images, c.labels, cfg.crop_size, name);
    slices.insert(slices.end(), std::make_move_iterator(s.begin()),
                  std::make_move_iterator(s.end()));
  }

  Rng rng(mix_seed(cfg.seed, 0xa46));
  const std::vector<SliceSample> augmented =
      augment_dataset(slices, rng, cfg.warps_per_slice);

  nlohmann::json meta = {{"count", augmented.size()},
                         {"source_slices", slices.size()},
                         {"crop_size", cfg.crop_size},
                         {"warps_per_slice", cfg.warps_per_slice},
                         {"seed", cfg.seed},
                         {"train_cases", train_names},
                         {"holdout_cases", eval_names}};
  save_dataset(paths.augment_dir / "dataset.myot", augmented, meta);
  std::ofstream(paths.augment_dir / "meta.json") << meta.dump(2) << "\n";
  std::printf("augment: %zu slices -> %zu samples at %s\n", slices.size(), augmented.size(),
              (paths.augment_dir / "dataset.myot").string().c_str());
}

inline TrainConfig member_train_config(const PipelineConfig& cfg, int block, int member,
                                       const std::string& arch) {
  TrainConfig tc;
  tc.block_id = block;
  tc.arch = arch_from_name(arch);
  tc.depth = cfg.depth;
  tc.base_channels = cfg.base_channels;
  tc.epochs = cfg.epochs;
  tc.lr = cfg.lr;
  tc.batch_size = cfg.batch_size;
  tc.val_fraction = cfg.val_fraction;
  tc.per_sample_loss = cfg.per_sample_loss;
  tc.seed = mix_seed(cfg.seed, 0x7000 + static_cast<uint64_t>(block) * 16 +
                                   static_cast<uint64_t>(member));
  return tc;
}

inline std::vector<std::string> block_member_archs(const PipelineConfig& cfg, int block) {
  if (block >= 3) return cfg.members;
  return {cfg.arch};
}

inline void run_train(const PipelineConfig& cfg) {
  const StagePaths paths = stage_paths(cfg);
  const std::vector<SliceSample> samples = load_dataset(paths.augment_dir / "dataset.myot");
  fs::create_directories(paths.train_dir);
  const std::array<BlockSpec, kNumBlocks> specs = default_blocks();

  for (int b = 0; b < kNumBlocks; ++b) {
    if (cfg.block_filter >= 0 && b != cfg.block_filter) continue;
    const std::vector<BlockPair> dataset = encode(samples, specs[static_cast<size_t>(b)]);
    const auto [train, val] = split(dataset, cfg.val_fraction, mix_seed(cfg.seed, 0x59117));
    const std::vector<std::string> archs = block_member_archs(cfg, b);
    for (size_t m = 0; m < archs.size(); ++m) {
      const TrainConfig tc = member_train_config(cfg, b, static_cast<int>(m), archs[m]);
      std::printf("train: block %d (%s) member %zu/%zu arch %s, %zu train / %zu val\n", b,
                  block_name(b).c_str(), m + 1, archs.size(), archs[m].c_str(), train.size(),
                  val.size());
      auto [net, report] = train_block(train, val, tc);
      const std::string stem = "block" + std::to_string(b) + ".m" + std::to_string(m);
      save_network(net, (paths.train_dir / (stem + ".ckpt")).string());
      std::ofstream log(paths.train_dir / (stem + ".jsonl"));
      for (const EpochStats& e : report.epochs) {
        nlohmann::json row = {{"epoch", e.epoch},
                              {"train_loss", e.train_loss},
                              {"val_dice", e.val_dice}};
        log << row.dump() << "\n";
      }
      nlohmann::json best = {{"best_epoch", report.best_epoch},
                             {"best_val_dice", report.best_val_dice}};
      log << best.dump() << "\n";
      std::printf("train: block %d member %zu best epoch %d val dice %.4f\n", b, m,
                  report.best_epoch, report.best_val_dice);
    }
  }
}

inline std::array<std::vector<Network>, kNumBlocks> load_models(const PipelineConfig& cfg,
                                                                const StagePaths& paths) {
  std::array<std::vector<Network>, kNumBlocks> models;
  for (int b = 0; b < kNumBlocks; ++b) {
    const size_t n_members = block_member_archs(cfg, b).size();
    for (size_t m = 0; m < n_members; ++m) {
      const fs::path ckpt =
          paths.train_dir / ("block" + std::to_string(b) + ".m" + std::to_string(m) + ".ckpt");
      require(fs::exists(ckpt), Err::MissingModel,
              "checkpoint missing at " + ckpt.string() + "; run `myops train` first");
      models[static_cast<size_t>(b)].push_back(load_network(ckpt.string()));
    }
  }
  return models;
}

inline Volume predict_case(const PipelineConfig& cfg,
                           std::array<std::vector<Network>, kNumBlocks>& models,
                           const CaseData& c) {
  const std::vector<std::array<GridF, 3>> slices =
      extract_inference_slices(c.images, cfg.crop_size);
  const std::array<BlockSpec, kNumBlocks> specs = default_blocks();
  const RawPredictions raw = predict_blocks(models, slices, specs);
  const RawPredictions post = postprocess(raw);
  Volume out(c.labels.nx, c.labels.ny, c.labels.nz);
  out.label_flag = true;
  for (int z = 0; z < c.labels.nz; ++z) {
    const GridI cropped = decode_slice_labels(post, static_cast<size_t>(z));
    const GridI full = uncrop(cropped, c.labels.ny, c.labels.nx);
    for (int y = 0; y < c.labels.ny; ++y)
      for (int x = 0; x < c.labels.nx; ++x)
        out.at(x, y, z) = static_cast<double>(full(y, x));
  }
  return out;
}

inline void run_predict(const PipelineConfig& cfg) {
  const StagePaths paths = stage_paths(cfg);
  std::array<std::vector<Network>, kNumBlocks> models = load_models(cfg, paths);
  const std::vector<std::string> names = list_cases(cfg.data_dir);
  const auto [train_names, eval_names] = split_cases(names, cfg.holdout_cases);
  fs::create_directories(paths.predict_dir);
  for (const std::string& name : eval_names) {
    const CaseData c = load_case(fs::path(cfg.data_dir) / name);
    const Volume seg = predict_case(cfg, models, c);
    save_nifti(paths.predict_dir / (name + "_seg.nii"), seg);
    std::printf("predict: %s\n", (paths.predict_dir / (name + "_seg.nii")).string().c_str());
  }
}

// ---- evaluation report ---------------------------------------------------

struct CaseRow {
  std::string name;
  // columns: the five tissue classes, then scar and edema+scar composites
  std::array<double, 7> dice;
  std::array<double, 7> jaccard;
};

inline const std::array<std::string, 7>& metric_columns() {
  static const std::array<std::string, 7> cols = {"lvbp", "rvbp",  "lvnm", "lvme",
                                                  "lvms", "scar", "edema_scar"};
  return cols;
}

inline CaseRow evaluate_case(const std::string& name, const Volume& pred, const Volume& gt,
                             bool empty_empty_is_one) {
  require(pred.same_dims(gt), Err::DimMismatch, "prediction and truth disagree on dims");
  CaseRow row;
  row.name = name;
  const std::array<int32_t, 5> codes = channel_codes();
  for (int c = 0; c < 5; ++c) {
    const OverlapCounts oc = count_overlap(pred, gt, codes[static_cast<size_t>(c)]);
    row.dice[static_cast<size_t>(c)] = dice_from_counts(oc, empty_empty_is_one);
    row.jaccard[static_cast<size_t>(c)] = jaccard_from_counts(oc, empty_empty_is_one);
  }
  const OverlapCounts ms = count_overlap(pred, gt, std::vector<int32_t>{2221});
  row.dice[5] = dice_from_counts(ms, empty_empty_is_one);
  row.jaccard[5] = jaccard_from_counts(ms, empty_empty_is_one);
  const OverlapCounts mems = count_overlap(pred, gt, std::vector<int32_t>{1220, 2221});
  row.dice[6] = dice_from_counts(mems, empty_empty_is_one);
  row.jaccard[6] = jaccard_from_counts(mems, empty_empty_is_one);
  return row;
}

inline std::string pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * x);
  return buf;
}

inline std::string pct_pm(const Stat& s) { return pct(s.mean) + "±" + pct(s.stdev); }

inline nlohmann::json report_json(const std::vector<CaseRow>& rows, bool empty_empty_is_one) {
  const auto& cols = metric_columns();
  nlohmann::json cases = nlohmann::json::array();
  for (const CaseRow& r : rows) {
    nlohmann::json jr = {{"case", r.name}};
    for (size_t c = 0; c < cols.size(); ++c) {
      jr["dice"][cols[c]] = r.dice[c];
      jr["jaccard"][cols[c]] = r.jaccard[c];
    }
    cases.push_back(jr);
  }
  nlohmann::json agg;
  for (size_t c = 0; c < cols.size(); ++c) {
    std::vector<double> dv, jv;
    for (const CaseRow& r : rows) {
      dv.push_back(r.dice[c]);
      jv.push_back(r.jaccard[c]);
    }
    const Stat ds = mean_std(dv), js = mean_std(jv);
    agg["dice"][cols[c]] = {{"mean", ds.mean}, {"std", ds.stdev}, {"pct", pct_pm(ds)}};
    agg["jaccard"][cols[c]] = {{"mean", js.mean}, {"std", js.stdev}, {"pct", pct_pm(js)}};
  }
  return {{"empty_empty_is_one", empty_empty_is_one},
          {"cases", cases},
          {"aggregate", agg}};
}

inline std::string report_csv(const std::vector<CaseRow>& rows) {
  const auto& cols = metric_columns();
  std::string out = "case";
  for (const std::string& c : cols) out += ",dice_" + c;
  for (const std::string& c : cols) out += ",jaccard_" + c;
  out += "\n";
  for (const CaseRow& r : rows) {
    out += r.name;
    for (size_t c = 0; c < cols.size(); ++c) out += "," + pct(r.dice[c]);
    for (size_t c = 0; c < cols.size(); ++c) out += "," + pct(r.jaccard[c]);
    out += "\n";
  }
  out += "aggregate";
  for (int which = 0; which < 2; ++which) {
    for (size_t c = 0; c < cols.size(); ++c) {
      std::vector<double> v;
      for (const CaseRow& r : rows) v.push_back(which == 0 ? r.dice[c] : r.jaccard[c]);
      out += "," + pct_pm(mean_std(v));
    }
  }
  out += "\n";
  return out;
}

inline fs::path run_evaluate(const PipelineConfig& cfg) {
  const StagePaths paths = stage_paths(cfg);
  const std::vector<std::string> names = list_cases(cfg.data_dir);
  const auto [train_names, eval_names] = split_cases(names, cfg.holdout_cases);
  std::vector<CaseRow> rows;
  for (const std::string& name : eval_names) {
    const fs::path seg_path = paths.predict_dir / (name + "_seg.nii");
    require(fs::exists(seg_path), Err::StageFailure,
            "prediction missing at " + seg_path.string() + "; run `myops predict` first");
    const Volume pred = as_labels(load_nifti(seg_path.string()));
    const Volume gt = as_labels(load_nifti((fs::path(cfg.data_dir) / name / "labels.nii").string()));
    rows.push_back(evaluate_case(name, pred, gt, cfg.empty_empty_is_one));
  }
  fs::create_directories(paths.evaluate_dir);
  const nlohmann::json rep = report_json(rows, cfg.empty_empty_is_one);
  std::ofstream(paths.evaluate_dir / "report.json") << rep.dump(2) << "\n";
  std::ofstream(paths.evaluate_dir / "report.csv") << report_csv(rows);
  const auto& cols = metric_columns();
  for (size_t c = 0; c < cols.size(); ++c) {
    std::vector<double> v;
    for (const CaseRow& r : rows) v.push_back(r.dice[c]);
    std::printf("evaluate: dice %-11s %s\n", cols[c].c_str(), pct_pm(mean_std(v)).c_str());
  }
  std::printf("evaluate: report at %s\n", (paths.evaluate_dir / "report.json").string().c_str());
  return paths.evaluate_dir / "report.json";
}

inline int run_gradcheck(uint64_t seed) {
  std::vector<GradCheckResult> results = gradcheck_ops(seed);
  for (Arch a : {Arch::UNet, Arch::UNetPP}) {
    std::vector<GradCheckResult> nets = gradcheck_network(seed, a);
    double worst = 0.0;
    size_t checked = 0;
    for (const GradCheckResult& r : nets) {
      worst = std::max(worst, r.max_rel_err);
      checked += r.checked;
    }
    GradCheckResult combined;
    combined.name = arch_name(a) + ".end_to_end";
    combined.max_rel_err = worst;
    combined.checked = checked;
    results.push_back(combined);
  }
  bool ok = true;
  for (const GradCheckResult& r : results) {
    std::printf("gradcheck: %-20s max rel err %.3e over %zu entries\n", r.name.c_str(),
                r.max_rel_err, r.checked);
    ok = ok && r.max_rel_err < 1e-5;
  }
  std::printf("gradcheck: %s\n", ok ? "ok" : "FAILED (tolerance 1e-5)");
  return ok ? 0 : 1;
}

}  // namespace myops
