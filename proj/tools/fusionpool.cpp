// Copyright 2026 The FusionPool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// fusionpool: command-line driver for ingest, extraction, pooling, training,
// evaluation and explanation.

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fusionpool.hpp"

namespace fs = std::filesystem;
using namespace fusionpool;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kUsageExit = 2;
constexpr int kInternalExit = 70;

// Module errors exit with 10 + their code, so every code is distinct.
int exit_code_for(ErrorCode code) { return 10 + static_cast<int>(code); }

struct Synthetic {
  int input_size = 32;
  int map_count = 8;
  int map_height = 4;
  int map_width = 4;
};

struct Options {
  std::string config_path;
  std::vector<std::string> manifests;
  std::vector<std::string> backbones;
  std::optional<std::uint64_t> synthetic;
  std::vector<std::string> pools;
  std::string out;
  std::string head;
  std::string kind = "knn";
  std::uint64_t seed = 0;
  int jobs = 1;
  std::optional<int> interval;
  std::string positive;
  std::string class_name;
  std::vector<std::string> aliases;
  std::size_t limit = 0;

  HeadConfig head_config;
  TsneConfig tsne;
  Synthetic synthetic_dims;
  std::map<std::string, std::string> echo;  // effective settings for provenance
};

void write_text(const std::string& path, const std::string& text) {
  detail::write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

template <typename T>
T parse_value(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  T v{};
  in >> v;
  if (!in || !(in >> std::ws).eof()) {
    fail(ErrorCode::kInvalidArgument, "bad value '" + text + "' for " + what);
  }
  return v;
}

void apply_config(Options& o) {
  if (o.config_path.empty()) return;
  const auto cfg = ConfigFile::load(o.config_path);
  auto num = [&](const char* section, const char* key, auto& slot) {
    if (auto v = cfg.get(section, key)) {
      slot = parse_value<std::decay_t<decltype(slot)>>(*v, std::string(section) + "." + key);
    }
  };
  if (auto v = cfg.get("pipeline", "seed")) o.seed = parse_value<std::uint64_t>(*v, "pipeline.seed");
  num("pipeline", "jobs", o.jobs);
  if (auto v = cfg.get("pipeline", "interval")) o.interval = parse_value<int>(*v, "pipeline.interval");
  if (auto v = cfg.get("pipeline", "out"); v && o.out.empty()) o.out = *v;
  if (auto v = cfg.get("pipeline", "manifest"); v && o.manifests.empty()) o.manifests.push_back(*v);
  if (auto v = cfg.get("pipeline", "synthetic"); v && !o.synthetic) {
    o.synthetic = parse_value<std::uint64_t>(*v, "pipeline.synthetic");
  }
  if (o.backbones.empty()) {
    for (const auto& [name, path] : cfg.section("backbones")) o.backbones.push_back(name + "=" + path);
  }
  if (auto v = cfg.get("head", "kind")) o.kind = *v;
  num("head", "k", o.head_config.k);
  num("head", "lambda", o.head_config.lambda);
  num("head", "learning_rate", o.head_config.learning_rate);
  num("head", "epochs", o.head_config.epochs);
  num("head", "rounds", o.head_config.rounds);
  num("head", "var_floor", o.head_config.var_floor);
  num("tsne", "perplexity", o.tsne.perplexity);
  num("tsne", "iterations", o.tsne.iterations);
  num("tsne", "exaggeration", o.tsne.exaggeration);
  num("tsne", "exaggeration_iterations", o.tsne.exaggeration_iterations);
  num("tsne", "learning_rate", o.tsne.learning_rate);
  num("synthetic", "input_size", o.synthetic_dims.input_size);
  num("synthetic", "map_count", o.synthetic_dims.map_count);
  num("synthetic", "map_height", o.synthetic_dims.map_height);
  num("synthetic", "map_width", o.synthetic_dims.map_width);
}

// ---- provenance ----

std::string provenance_path(const std::string& out, bool out_is_dir) {
  if (out.empty()) return {};
  if (out_is_dir) return (fs::path(out) / "provenance.txt").string();
  return out + ".provenance.txt";
}

void write_provenance(const std::string& command, const Options& o,
                      const std::vector<std::string>& inputs, bool out_is_dir) {
  std::ostringstream p;
  p << "tool=fusionpool " << kVersion << "\n";
  p << "command=" << command << "\n";
  p << "seed=" << o.seed << "\n";
  for (const auto& [k, v] : o.echo) p << "option." << k << "=" << v << "\n";
  auto all = inputs;
  if (!o.config_path.empty()) all.push_back(o.config_path);
  for (const auto& in : all) {
    std::error_code ec;
    if (!fs::is_regular_file(in, ec)) continue;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", detail::crc32(detail::read_file(in)));
    p << "input." << in << "=crc32:" << buf << "\n";
  }
  p << "zlib=" << ZLIB_VERSION << "\n";
  p << "libpng=" << PNG_LIBPNG_VER_STRING << "\n";
  const auto path = provenance_path(o.out, out_is_dir);
  if (path.empty()) {
    std::cerr << p.str();
  } else {
    write_text(path, p.str());
  }
}

// ---- backbones and frames ----

BackboneSpec synthetic_spec(const std::string& name, std::uint64_t seed, const Synthetic& d) {
  BackboneSpec s;
  s.name = name;
  s.input_size = d.input_size;
  s.feature_dim = d.map_count;
  s.map_count = d.map_count;
  s.map_height = d.map_height;
  s.map_width = d.map_width;
  s.normalization = Normalization::kScalePm1;
  s.source = "synthetic:" + std::to_string(seed);
  s.validate();
  return s;
}

std::vector<Extractor> load_extractors(const Options& o) {
  std::vector<BackboneSpec> specs;
  for (const auto& arg : o.backbones) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size()) {
      fail(ErrorCode::kInvalidArgument, "--backbone expects NAME=MODELPATH, got '" + arg + "'");
    }
    const auto name = arg.substr(0, eq), source = arg.substr(eq + 1);
    if (source.rfind("synthetic:", 0) == 0) {
      specs.push_back(synthetic_spec(name, parse_synthetic_seed(source), o.synthetic_dims));
    } else {
      specs.push_back(spec_from_model(name, source));
    }
  }
  if (o.synthetic) specs.push_back(synthetic_spec("synthetic", *o.synthetic, o.synthetic_dims));
  if (specs.empty()) {
    fail(ErrorCode::kInvalidArgument, "no backbones: pass --backbone NAME=MODELPATH or --synthetic SEED");
  }
  std::vector<Extractor> out;
  for (const auto& s : specs) out.push_back(load_backbone(s));
  return out;
}

Schema schema_for(const std::vector<Extractor>& ex) {
  Schema s;
  for (const auto& e : ex) s.push_back({e.spec().name, static_cast<std::uint32_t>(e.feature_dim())});
  return s;
}

// Video files are handed to $FUSIONPOOL_FRAME_DUMPER, invoked as
// `<dumper> <video> <output-dir>`; it must write PNG frames into the directory.
std::string locate_frames(const std::string& media) {
  std::error_code ec;
  if (!fs::is_regular_file(media, ec)) return media;
  if (detail::ascii_fold(fs::path(media).extension().string()) == ".png") return media;
  const char* dumper = std::getenv("FUSIONPOOL_FRAME_DUMPER");
  if (!dumper || !*dumper) {
    fail(ErrorCode::kIo, "'" + media + "' is not a PNG frame; set FUSIONPOOL_FRAME_DUMPER to decode video");
  }
  detail::Fnv1a64 h;
  h.update(std::string_view(fs::absolute(media).string()));
  char tag[24];
  std::snprintf(tag, sizeof tag, "%016llx", static_cast<unsigned long long>(h.digest()));
  const auto dir = fs::temp_directory_path() / "fusionpool-frames" / tag;
  if (!fs::exists(dir / ".done", ec)) {
    fs::create_directories(dir);
    const std::string cmd = std::string("\"") + dumper + "\" \"" + media + "\" \"" + dir.string() + "\"";
    if (std::system(cmd.c_str()) != 0) fail(ErrorCode::kIo, "frame dumper failed on '" + media + "'");
    std::ofstream(dir / ".done").put('\n');
  }
  return dir.string();
}

DatasetManifest load_manifest_with(const Options& o, const std::string& path) {
  auto m = load_manifest(path);
  if (o.interval) {
    if (*o.interval < 1) fail(ErrorCode::kInvalidArgument, "--interval must be >= 1");
    m.sampling_interval = *o.interval;
  }
  return m;
}

FeaturePool extract_pool(const Options& o, const DatasetManifest& m,
                         const std::vector<Extractor>& extractors) {
  const auto plan = plan_frames(m, locate_frames);
  auto samples = detail::parallel_map<ExtractedSample>(plan.size(), o.jobs, [&](std::size_t i) {
    const auto image = read_png(plan[i].frame_file);
    ExtractedSample s;
    s.sample_id = plan[i].sample_id;
    s.label = plan[i].class_name;
    for (const auto& ex : extractors) {
      s.per_backbone.push_back(ex.extract_one(preprocess_frame(image, ex.spec(), s.sample_id)));
    }
    return s;
  });
  std::vector<std::string> names;
  for (const auto& f : plan) names.push_back(f.class_name);
  return build_pool(schema_for(extractors), samples, TaskInfo{m.task_id, m.dataset_name},
                    LabelSpace::first_seen(names));
}

MergePolicy policy_from(const Options& o) {
  MergePolicy p;
  for (const auto& a : o.aliases) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == a.size()) {
      fail(ErrorCode::kInvalidArgument, "--alias expects LOCAL=CANONICAL, got '" + a + "'");
    }
    p.alias(a.substr(0, eq), a.substr(eq + 1));
  }
  return p;
}

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::kInvalidArgument, what);
}

std::string describe_pool(const FeaturePool& pool) {
  std::ostringstream o;
  o << "records " << pool.size() << "\n";
  o << "dimension " << pool.dim() << "\n";
  o << "backbones";
  for (const auto& e : pool.schema) o << " " << e.backbone << ":" << e.dim;
  o << "\n";
  const auto counts = pool.class_counts();
  o << "classes " << pool.labels.size() << "\n";
  for (std::size_t c = 0; c < pool.labels.size(); ++c) {
    o << "  " << c << " " << pool.labels.classes[c] << " " << counts[c] << "\n";
  }
  o << "tasks " << pool.tasks.size() << "\n";
  for (const auto& t : pool.tasks) {
    o << "  " << t.task_id << " " << t.dataset_name << " classes";
    for (auto c : pool.task_classes(t.task_id)) o << " " << pool.labels.classes[c];
    o << "\n";
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", pool.checksum);
  o << "checksum " << buf << "\n";
  return o.str();
}

std::string describe_head(const TrainedHead& h) {
  std::ostringstream o;
  o << "kind " << head_kind_name(h.kind) << "\n";
  o << "dimension " << h.dim << "\n";
  o << "classes";
  for (const auto& c : h.class_names) o << " " << c;
  o << "\n";
  o << "seed " << h.config.seed << "\n";
  for (const auto& w : h.warnings) o << "warning " << w << "\n";
  return o.str();
}

// ---- commands ----

int cmd_ingest(const Options& o) {
  require(o.manifests.size() == 1, "ingest needs exactly one --manifest");
  const auto m = load_manifest_with(o, o.manifests[0]);
  const auto plan = plan_frames(m, locate_frames);
  std::ostringstream t;
  t << "sample_id\tmedia_path\tframe\tfile\tclass\ttask\n";
  for (const auto& f : plan) {
    t << f.sample_id << "\t" << f.media_path << "\t" << f.frame_index << "\t" << f.frame_file << "\t"
      << f.class_name << "\t" << f.task_id << "\n";
  }
  if (o.out.empty()) {
    std::cout << t.str();
  } else {
    write_text(o.out, t.str());
  }
  std::cerr << m.dataset_name << ": " << m.entries.size() << " entries, " << plan.size()
            << " frames at interval " << m.sampling_interval << "\n";
  write_provenance("ingest", o, o.manifests, false);
  return 0;
}

int cmd_extract(const Options& o) {
  require(o.manifests.size() == 1, "extract needs exactly one --manifest");
  require(!o.out.empty(), "extract needs --out");
  const auto m = load_manifest_with(o, o.manifests[0]);
  const auto extractors = load_extractors(o);
  const auto pool = extract_pool(o, m, extractors);
  save_pool(pool, o.out);
  std::cerr << "wrote " << pool.size() << " records of dimension " << pool.dim() << " to " << o.out << "\n";
  write_provenance("extract", o, o.manifests, false);
  return 0;
}

int cmd_fuse(const Options& o) {
  require(!o.pools.empty(), "fuse needs at least one --pool");
  require(!o.out.empty(), "fuse needs --out");
  const auto policy = policy_from(o);
  auto merged = load_pool(o.pools[0]);
  for (std::size_t i = 1; i < o.pools.size(); ++i) merged = merge_pools(merged, load_pool(o.pools[i]), policy);
  save_pool(merged, o.out);
  std::cout << describe_pool(merged);
  write_provenance("fuse", o, o.pools, false);
  return 0;
}

int cmd_add_task(const Options& o) {
  require(!o.out.empty(), "add-task needs --out");
  require(!o.pools.empty(), "add-task needs the base --pool");
  const auto policy = policy_from(o);
  const auto base = load_pool(o.pools[0]);
  FeaturePool fresh;
  std::vector<std::string> inputs = o.pools;
  if (!o.manifests.empty()) {
    require(o.manifests.size() == 1 && o.pools.size() == 1,
            "add-task takes one base --pool and one --manifest");
    const auto extractors = load_extractors(o);
    if (!(schema_for(extractors) == base.schema)) {
      fail(ErrorCode::kSchemaMismatch, "backbones do not match the base pool schema");
    }
    fresh = extract_pool(o, load_manifest_with(o, o.manifests[0]), extractors);
    inputs.push_back(o.manifests[0]);
  } else {
    require(o.pools.size() == 2, "add-task takes a base --pool plus a new-task --pool or --manifest");
    fresh = load_pool(o.pools[1]);
  }
  require(fresh.tasks.size() == 1, "the new data must hold exactly one task");
  std::vector<LabeledFeatures> samples;
  samples.reserve(fresh.size());
  for (const auto& r : fresh.records) {
    samples.push_back({r.sample_id, r.task_id, fresh.labels.classes[r.global_class], r.features});
  }
  const auto pool = add_task(base, samples, fresh.tasks[0], policy);
  save_pool(pool, o.out);
  std::cout << describe_pool(pool);
  write_provenance("add-task", o, inputs, false);
  return 0;
}

int cmd_train(Options o) {
  require(o.pools.size() == 1, "train needs exactly one --pool");
  require(!o.out.empty(), "train needs --out");
  o.head_config.kind = parse_head_kind(o.kind);
  o.head_config.seed = o.seed;
  o.head_config.jobs = o.jobs;
  const auto pool = load_pool(o.pools[0]);
  const auto head = train(pool, o.head_config);
  save_head(head, o.out);
  std::cout << describe_head(head);
  for (const auto& w : head.warnings) std::cerr << "warning: " << w << "\n";
  write_provenance("train", o, o.pools, false);
  return 0;
}

int cmd_eval(const Options& o) {
  require(!o.head.empty(), "eval needs --head");
  require(o.pools.size() == 1, "eval needs exactly one --pool");
  const auto head = load_head(o.head);
  const auto pool = load_pool(o.pools[0]);
  std::optional<std::uint32_t> positive;
  if (!o.positive.empty()) positive = LabelSpace{head.class_names}.index_of(o.positive);
  const auto result = evaluate(head, pool, positive, o.jobs);
  const auto text = report_text(result.report);
  std::cout << text;
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_text((fs::path(o.out) / "report.txt").string(), text);
    write_text((fs::path(o.out) / "metrics.csv").string(), report_csv(result.report));
    write_text((fs::path(o.out) / "confusion.csv").string(), confusion_csv(result.confusion, head.class_names));
  }
  auto inputs = o.pools;
  inputs.push_back(o.head);
  write_provenance("eval", o, inputs, true);
  return 0;
}

int cmd_explain(const Options& o) {
  require(!o.head.empty(), "explain needs --head");
  require(o.manifests.size() == 1, "explain needs exactly one --manifest");
  require(!o.out.empty(), "explain needs --out");
  const auto head = load_head(o.head);
  require_linear_head(head);
  const auto extractors = load_extractors(o);
  const auto schema = schema_for(extractors);
  if (schema_dim(schema) != head.dim) {
    fail(ErrorCode::kSchemaMismatch, "backbones give dimension " + std::to_string(schema_dim(schema)) +
                                         " but the head expects " + std::to_string(head.dim));
  }
  std::optional<std::uint32_t> forced;
  if (!o.class_name.empty()) forced = LabelSpace{head.class_names}.index_of(o.class_name);
  const auto m = load_manifest_with(o, o.manifests[0]);
  auto plan = plan_frames(m, locate_frames);
  if (o.limit > 0 && plan.size() > o.limit) plan.resize(o.limit);
  fs::create_directories(o.out);
  std::ostringstream index;
  index << "sample_id,backbone,class_name,predicted,file\n";
  for (const auto& f : plan) {
    const auto image = read_png(f.frame_file);
    std::vector<FeatureMaps> maps;
    std::vector<std::span<const float>> pooled;
    for (const auto& ex : extractors) maps.push_back(ex.extract_one(preprocess_frame(image, ex.spec(), f.sample_id)));
    for (const auto& fm : maps) pooled.emplace_back(fm.pooled);
    const auto fused = fuse(std::span<const std::span<const float>>(pooled), schema);
    const auto predicted = predict(head, fused);
    const auto c = forced.value_or(predicted);
    for (std::size_t b = 0; b < extractors.size(); ++b) {
      const auto& name = schema[b].backbone;
      const auto h = grad_cam(maps[b], head, c, schema, name);
      const auto file = std::to_string(f.sample_id) + "_" + name + ".png";
      render_heatmap(h, image, (fs::path(o.out) / file).string());
      index << f.sample_id << "," << name << "," << head.class_names[c] << ","
            << head.class_names[predicted] << "," << file << "\n";
    }
  }
  write_text((fs::path(o.out) / "index.csv").string(), index.str());
  std::cerr << "wrote " << plan.size() * extractors.size() << " heatmaps to " << o.out << "\n";
  write_provenance("explain", o, {o.head, o.manifests[0]}, true);
  return 0;
}

int cmd_embed(Options o) {
  require(o.pools.size() == 1, "embed needs exactly one --pool");
  require(!o.out.empty(), "embed needs --out");
  o.tsne.seed = o.seed;
  const auto pool = load_pool(o.pools[0]);
  const auto e = tsne(pool, o.tsne);
  fs::create_directories(o.out);
  write_text((fs::path(o.out) / "embedding.csv").string(), embedding_csv(e, pool.labels.classes));
  render_scatter(e, pool.labels.classes, (fs::path(o.out) / "embedding.png").string());
  char buf[96];
  std::snprintf(buf, sizeof buf, "kl %.6f (after %u iterations: %.6f)\n", e.final_kl,
                o.tsne.momentum_switch, e.kl_at_switch);
  std::cout << buf;
  write_provenance("embed", o, o.pools, true);
  return 0;
}

int cmd_report(const Options& o) {
  require(!o.pools.empty() || !o.head.empty(), "report needs --pool or --head");
  std::ostringstream t;
  for (const auto& p : o.pools) t << "pool " << p << "\n" << describe_pool(load_pool(p)) << "\n";
  if (!o.head.empty()) t << "head " << o.head << "\n" << describe_head(load_head(o.head));
  if (o.out.empty()) {
    std::cout << t.str();
  } else {
    write_text(o.out, t.str());
  }
  auto inputs = o.pools;
  if (!o.head.empty()) inputs.push_back(o.head);
  write_provenance("report", o, inputs, false);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-backbone feature pools and classical classifier heads"};
  app.set_version_flag("--version", std::string("fusionpool ") + kVersion);
  app.require_subcommand(1);

  Options o;
  std::uint64_t synthetic_seed = 0;
  auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config_path, "key=value config file with [section] headers");
    s->add_option("--seed", o.seed, "seed for every random choice");
    s->add_option("--out", o.out, "output path");
  };
  auto backbones = [&](CLI::App* s) {
    s->add_option("--backbone", o.backbones, "NAME=MODELPATH (repeatable; MODELPATH may be synthetic:SEED)");
    s->add_option("--synthetic", synthetic_seed, "append a synthetic backbone with this seed");
    s->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    s->add_option("--interval", o.interval, "frame sampling interval");
  };

  auto* ingest = app.add_subcommand("ingest", "validate a manifest and list the sampled frames");
  common(ingest);
  ingest->add_option("--manifest", o.manifests, "dataset manifest")->required();
  ingest->add_option("--interval", o.interval, "frame sampling interval");

  auto* extract = app.add_subcommand("extract", "extract, fuse and pool one manifest");
  common(extract);
  backbones(extract);
  extract->add_option("--manifest", o.manifests, "dataset manifest");

  auto* fuse_cmd = app.add_subcommand("fuse", "merge pools into one label space");
  common(fuse_cmd);
  fuse_cmd->add_option("--pool", o.pools, "input pool (repeatable)");
  fuse_cmd->add_option("--alias", o.aliases, "LOCAL=CANONICAL class alias (repeatable)");

  auto* add = app.add_subcommand("add-task", "append a new task to an existing pool");
  common(add);
  backbones(add);
  add->add_option("--pool", o.pools, "base pool, optionally followed by the new task's pool");
  add->add_option("--manifest", o.manifests, "manifest of the new task");
  add->add_option("--alias", o.aliases, "LOCAL=CANONICAL class alias (repeatable)");

  auto* train_cmd = app.add_subcommand("train", "train a classifier head on a pool");
  common(train_cmd);
  train_cmd->add_option("--pool", o.pools, "training pool");
  train_cmd->add_option("--kind", o.kind, "knn|logreg|softmax|svm|adaboost|nb");
  train_cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  train_cmd->add_option("--k", o.head_config.k, "KNN neighbours");
  train_cmd->add_option("--lambda", o.head_config.lambda, "L2 strength");
  train_cmd->add_option("--learning-rate", o.head_config.learning_rate, "gradient step");
  train_cmd->add_option("--epochs", o.head_config.epochs, "gradient descent epochs");
  train_cmd->add_option("--rounds", o.head_config.rounds, "AdaBoost rounds");
  train_cmd->add_option("--var-floor", o.head_config.var_floor, "NB variance floor");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a head on a pool");
  common(eval_cmd);
  eval_cmd->add_option("--head", o.head, "trained head");
  eval_cmd->add_option("--pool", o.pools, "test pool");
  eval_cmd->add_option("--positive", o.positive, "positive class name for binary scores");
  eval_cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* explain = app.add_subcommand("explain", "render class activation maps for a manifest");
  common(explain);
  backbones(explain);
  explain->add_option("--head", o.head, "trained linear head");
  explain->add_option("--manifest", o.manifests, "frames to explain");
  explain->add_option("--class", o.class_name, "explain this class instead of the prediction");
  explain->add_option("--limit", o.limit, "at most this many frames");

  auto* embed = app.add_subcommand("embed", "2-D t-SNE embedding of a pool");
  common(embed);
  embed->add_option("--pool", o.pools, "pool to embed");
  embed->add_option("--perplexity", o.tsne.perplexity, "t-SNE perplexity");
  embed->add_option("--iterations", o.tsne.iterations, "t-SNE iterations");

  auto* report = app.add_subcommand("report", "describe pools and heads");
  common(report);
  report->add_option("--pool", o.pools, "pool (repeatable)");
  report->add_option("--head", o.head, "head");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub->get_option_no_throw("--synthetic") && sub->count("--synthetic") > 0) {
      o.synthetic = synthetic_seed;
    }
    // Flags override the config file.
    Options flags = o;
    apply_config(o);
    auto keep = [&](const char* flag, auto& dst, const auto& src) {
      if (sub->get_option_no_throw(flag) && sub->count(flag) > 0) dst = src;
    };
    keep("--seed", o.seed, flags.seed);
    keep("--jobs", o.jobs, flags.jobs);
    keep("--interval", o.interval, flags.interval);
    keep("--out", o.out, flags.out);
    keep("--kind", o.kind, flags.kind);
    keep("--k", o.head_config.k, flags.head_config.k);
    keep("--lambda", o.head_config.lambda, flags.head_config.lambda);
    keep("--learning-rate", o.head_config.learning_rate, flags.head_config.learning_rate);
    keep("--epochs", o.head_config.epochs, flags.head_config.epochs);
    keep("--rounds", o.head_config.rounds, flags.head_config.rounds);
    keep("--var-floor", o.head_config.var_floor, flags.head_config.var_floor);
    keep("--perplexity", o.tsne.perplexity, flags.tsne.perplexity);
    keep("--iterations", o.tsne.iterations, flags.tsne.iterations);

    for (const auto* opt : sub->get_options()) {
      if (opt->count() == 0 || opt->get_name() == "--help") continue;
      std::string joined;
      for (const auto& r : opt->results()) joined += (joined.empty() ? "" : " ") + r;
      o.echo[opt->get_name().substr(2)] = joined;
    }
    o.echo["jobs"] = std::to_string(o.jobs);

    const auto name = sub->get_name();
    if (name == "ingest") return cmd_ingest(o);
    if (name == "extract") return cmd_extract(o);
    if (name == "fuse") return cmd_fuse(o);
    if (name == "add-task") return cmd_add_task(o);
    if (name == "train") return cmd_train(o);
    if (name == "eval") return cmd_eval(o);
    if (name == "explain") return cmd_explain(o);
    if (name == "embed") return cmd_embed(o);
    if (name == "report") return cmd_report(o);
    return kUsageExit;
  } catch (const Error& e) {
    std::cerr << "fusionpool: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "fusionpool: internal error: " << e.what() << "\n";
    return kInternalExit;
  }
}
