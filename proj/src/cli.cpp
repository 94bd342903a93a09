#include "odml/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"

#include "odml/error.hpp"
#include "odml/oneshot.hpp"
#include "odml/rng.hpp"
#include "odml/sem2vec.hpp"
#include "odml/verify.hpp"

namespace odml {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

const char* const kDimensionNames[] = {"valence", "arousal", "dominance"};

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw DataError("failed writing " + path);
}

TaskIds ids_of(const OneShotTask& task) {
  TaskIds ids;
  for (const auto& rec : task.train_set) ids.train_ids.push_back(rec.id);
  for (const auto& rec : task.support_set) ids.support_ids.push_back(rec.id);
  for (const auto& rec : task.query_set) ids.query_ids.push_back(rec.id);
  return ids;
}

std::vector<std::string> task_names(const SplitSpec& spec) {
  if (spec.is_level()) return {kDimensionNames[0], kDimensionNames[1], kDimensionNames[2]};
  return {"categorical"};
}

LevDimension dimension_for_task(const std::string& task_name) {
  if (task_name == "categorical") return LevDimension::valence;
  return lev_dimension_from_name(task_name);
}

}  // namespace

Manifest build_manifest(const std::vector<FeatureRecord>& records, const SplitSpec& spec) {
  Manifest manifest;
  manifest.split = spec;
  for (const std::string& name : task_names(spec)) {
    manifest.tasks[name] = ids_of(assemble_task(records, spec, dimension_for_task(name)));
  }
  return manifest;
}

std::string manifest_to_json(const Manifest& manifest) {
  ordered_json j;
  j["split"] = ordered_json::parse(split_to_json(manifest.split));
  ordered_json tasks = ordered_json::object();
  for (const std::string& name : task_names(manifest.split)) {
    const auto it = manifest.tasks.find(name);
    if (it == manifest.tasks.end()) {
      throw ValidationError("manifest is missing its \"" + name + "\" task");
    }
    ordered_json t;
    t["train_ids"] = it->second.train_ids;
    t["support_ids"] = it->second.support_ids;
    t["query_ids"] = it->second.query_ids;
    tasks[name] = t;
  }
  j["tasks"] = tasks;
  return j.dump(2) + "\n";
}

namespace {

std::vector<std::string> string_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array of record ids");
  std::vector<std::string> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_string()) throw ParseError(where + ": expected an array of record ids");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

Manifest manifest_from_json(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(origin + ": manifest is not a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "split" && key != "tasks") {
      throw ParseError(origin + ": unknown key \"" + key + "\"");
    }
  }
  if (!j.contains("split")) throw ParseError(origin + ": missing \"split\"");
  if (!j.contains("tasks")) throw ParseError(origin + ": missing \"tasks\"");

  Manifest manifest;
  manifest.split = split_from_json(j.at("split").dump(), origin + ":split");
  const json& tasks = j.at("tasks");
  if (!tasks.is_object()) throw ParseError(origin + ": \"tasks\" is not an object");

  const std::vector<std::string> expected = task_names(manifest.split);
  for (const auto& [key, value] : tasks.items()) {
    if (std::find(expected.begin(), expected.end(), key) == expected.end()) {
      throw ParseError(origin + ": unexpected task \"" + key + "\" for a " +
                       manifest.split.mode + " split");
    }
  }
  for (const std::string& name : expected) {
    if (!tasks.contains(name)) throw ParseError(origin + ": missing task \"" + name + "\"");
    const json& t = tasks.at(name);
    if (!t.is_object()) throw ParseError(origin + ": task \"" + name + "\" is not an object");
    for (const auto& [key, value] : t.items()) {
      if (key != "train_ids" && key != "support_ids" && key != "query_ids") {
        throw ParseError(origin + ": task \"" + name + "\" has unknown key \"" + key + "\"");
      }
    }
    TaskIds ids;
    const std::string where = origin + ":" + name;
    ids.train_ids = string_list(t.value("train_ids", json::array()), where + ".train_ids");
    ids.support_ids = string_list(t.value("support_ids", json::array()), where + ".support_ids");
    ids.query_ids = string_list(t.value("query_ids", json::array()), where + ".query_ids");
    manifest.tasks[name] = std::move(ids);
  }
  return manifest;
}

Manifest load_manifest(const std::string& path) {
  return manifest_from_json(read_text_file(path), path);
}

void save_manifest(const std::string& path, const Manifest& manifest) {
  write_text_file(path, manifest_to_json(manifest));
}

OneShotTask task_from_ids(const std::vector<FeatureRecord>& records, const TaskIds& ids) {
  std::map<std::string, const FeatureRecord*> by_id;
  for (const auto& rec : records) by_id[rec.id] = &rec;
  auto lookup = [&by_id](const std::vector<std::string>& list,
                         std::vector<FeatureRecord>& out, const char* role) {
    out.reserve(list.size());
    for (const std::string& id : list) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) {
        throw DataError(std::string("manifest ") + role + " id \"" + id +
                        "\" is not in the records file");
      }
      out.push_back(*it->second);
    }
  };
  OneShotTask task;
  lookup(ids.train_ids, task.train_set, "train");
  lookup(ids.support_ids, task.support_set, "support");
  lookup(ids.query_ids, task.query_set, "query");
  return task;
}

SplitSpec split_by_name(const std::string& name, std::uint64_t support_seed) {
  if (name.rfind("synth-", 0) == 0) {
    const std::string arity = name.substr(6);
    const std::size_t colon = arity.find(':');
    if (colon != std::string::npos) {
      try {
        const std::size_t seen = std::stoull(arity.substr(0, colon));
        const std::size_t novel = std::stoull(arity.substr(colon + 1));
        if (seen >= 1 && novel >= 1) return synth_split(seen + novel, seen, support_seed);
      } catch (const std::exception&) {
      }
    }
    throw ValidationError("malformed synthetic split name \"" + name +
                          "\"; expected synth-<seen>:<novel>");
  }
  return build_split(name, support_seed);
}

namespace {

struct ProblemList {
  std::vector<std::string> items;

  void add(std::string problem) { items.push_back(std::move(problem)); }
  void raise_if_any(const std::string& origin, const char* what) const {
    if (items.empty()) return;
    std::string message = origin + ": " + what + ":";
    for (const auto& p : items) message += "\n  - " + p;
    throw ValidationError(message);
  }
};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& prefix,
                ProblemList& problems) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) problems.add(prefix + ": unknown key \"" + key + "\"");
  }
}

bool fetch_number(const json& j, const char* key, double& out, const std::string& prefix,
                  ProblemList& problems) {
  if (!j.contains(key)) return false;
  const json& v = j.at(key);
  if (!v.is_number()) {
    problems.add(prefix + "." + key + ": expected a number");
    return false;
  }
  out = v.get<double>();
  return true;
}

bool fetch_count(const json& j, const char* key, std::size_t& out, const std::string& prefix,
                 ProblemList& problems) {
  if (!j.contains(key)) return false;
  const json& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<std::int64_t>() < 0)) {
    problems.add(prefix + "." + key + ": expected a nonnegative integer");
    return false;
  }
  out = static_cast<std::size_t>(v.get<std::uint64_t>());
  return true;
}

bool fetch_string(const json& j, const char* key, std::string& out, const std::string& prefix,
                  ProblemList& problems) {
  if (!j.contains(key)) return false;
  const json& v = j.at(key);
  if (!v.is_string()) {
    problems.add(prefix + "." + key + ": expected a string");
    return false;
  }
  out = v.get<std::string>();
  return true;
}

}  // namespace

void RunConfig::validate() const {
  ProblemList problems;
  if (records.empty()) problems.add("\"records\" is required");
  if (manifest.empty()) problems.add("\"manifest\" is required");
  if (out_dir.empty()) problems.add("\"out_dir\" is required");
  for (const std::string& p : train.problems()) problems.add(p);
  problems.raise_if_any("run config", "invalid run configuration");
}

RunConfig run_config_from_json(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(origin + ": run config is not a JSON object");

  ProblemList problems;
  check_keys(j,
             {"records", "manifest", "out_dir", "model", "train", "loss",
              "checkpoint_every_epochs"},
             "config", problems);

  RunConfig cfg;
  if (!j.contains("records")) problems.add("config.records is required");
  if (!j.contains("manifest")) problems.add("config.manifest is required");
  if (!j.contains("out_dir")) problems.add("config.out_dir is required");
  fetch_string(j, "records", cfg.records, "config", problems);
  fetch_string(j, "manifest", cfg.manifest, "config", problems);
  fetch_string(j, "out_dir", cfg.out_dir, "config", problems);
  fetch_count(j, "checkpoint_every_epochs", cfg.checkpoint_every_epochs, "config", problems);

  if (j.contains("model")) {
    const json& m = j.at("model");
    if (!m.is_object()) {
      problems.add("config.model: expected an object");
    } else {
      check_keys(m, {"variant", "d_img", "d_body", "n_sem", "branch_width", "sem_hidden", "d_emb"},
                 "config.model", problems);
      if (fetch_string(m, "variant", cfg.model.variant, "config.model", problems)) {
        try {
          (void)variant_branches(cfg.model.variant);
        } catch (const ValidationError& e) {
          problems.add(std::string("config.model.variant: ") + e.what());
        }
      }
      fetch_count(m, "d_img", cfg.model.d_img, "config.model", problems);
      fetch_count(m, "d_body", cfg.model.d_body, "config.model", problems);
      fetch_count(m, "n_sem", cfg.model.n_sem, "config.model", problems);
      fetch_count(m, "branch_width", cfg.model.branch_width, "config.model", problems);
      fetch_count(m, "sem_hidden", cfg.model.sem_hidden, "config.model", problems);
      fetch_count(m, "d_emb", cfg.model.d_emb, "config.model", problems);
    }
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    if (!t.is_object()) {
      problems.add("config.train: expected an object");
    } else {
      check_keys(t,
                 {"lr", "batch_size", "classes_per_batch", "samples_per_class", "epochs",
                  "lr_decay", "decay_step_epochs", "rmsprop_smoothing", "rmsprop_eps", "seed",
                  "miner_epsilon", "weight_decay"},
                 "config.train", problems);
      cfg.lr_explicit = fetch_number(t, "lr", cfg.train.lr, "config.train", problems);
      fetch_count(t, "batch_size", cfg.train.batch_size, "config.train", problems);
      fetch_count(t, "classes_per_batch", cfg.train.classes_per_batch, "config.train", problems);
      fetch_count(t, "samples_per_class", cfg.train.samples_per_class, "config.train", problems);
      fetch_count(t, "epochs", cfg.train.epochs, "config.train", problems);
      fetch_number(t, "lr_decay", cfg.train.lr_decay, "config.train", problems);
      fetch_count(t, "decay_step_epochs", cfg.train.decay_step_epochs, "config.train", problems);
      fetch_number(t, "rmsprop_smoothing", cfg.train.rmsprop_smoothing, "config.train", problems);
      fetch_number(t, "rmsprop_eps", cfg.train.rmsprop_eps, "config.train", problems);
      if (t.contains("seed")) {
        const json& s = t.at("seed");
        if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
          problems.add("config.train.seed: expected a nonnegative integer");
        } else {
          cfg.train.seed = s.get<std::uint64_t>();
        }
      }
      fetch_number(t, "miner_epsilon", cfg.train.miner_epsilon, "config.train", problems);
      fetch_number(t, "weight_decay", cfg.train.weight_decay, "config.train", problems);
    }
  }

  if (j.contains("loss")) {
    const json& l = j.at("loss");
    if (!l.is_object()) {
      problems.add("config.loss: expected an object");
    } else {
      check_keys(l, {"margin", "alpha", "beta", "triplet_reduction", "class_weights"},
                 "config.loss", problems);
      fetch_number(l, "margin", cfg.train.loss.margin, "config.loss", problems);
      fetch_number(l, "alpha", cfg.train.loss.alpha, "config.loss", problems);
      fetch_number(l, "beta", cfg.train.loss.beta, "config.loss", problems);
      std::string reduction;
      if (fetch_string(l, "triplet_reduction", reduction, "config.loss", problems)) {
        if (reduction == "mean") {
          cfg.train.loss.triplet_reduction = TripletReduction::mean;
        } else if (reduction == "sum") {
          cfg.train.loss.triplet_reduction = TripletReduction::sum;
        } else {
          problems.add("config.loss.triplet_reduction: expected \"mean\" or \"sum\"");
        }
      }
      if (l.contains("class_weights")) {
        const json& w = l.at("class_weights");
        if (!w.is_array()) {
          problems.add("config.loss.class_weights: expected an array of numbers");
        } else {
          cfg.train.loss.class_weights.clear();
          for (const auto& v : w) {
            if (!v.is_number()) {
              problems.add("config.loss.class_weights: expected an array of numbers");
              break;
            }
            cfg.train.loss.class_weights.push_back(v.get<double>());
          }
        }
      }
    }
  }

  // Value checks join the same report so a bad file surfaces everything in
  // one pass.
  for (const std::string& p : cfg.train.problems()) problems.add("config.train: " + p);

  problems.raise_if_any(origin, "invalid run configuration");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(read_text_file(path), path);
}

namespace {

std::unique_ptr<SemSource> make_sem_source(const ModelConfig& model_cfg,
                                           const std::string& records_path) {
  if (!model_cfg.branches().sem) return nullptr;
  const fs::path base = fs::path(records_path).parent_path();
  return std::make_unique<FileSemSource>(base.string(), model_cfg.n_sem);
}

void preflight_segmaps(const Manifest& manifest, const std::vector<FeatureRecord>& records,
                       const std::string& records_path) {
  const fs::path base = fs::path(records_path).parent_path();
  std::set<std::string> used_ids;
  for (const auto& [name, ids] : manifest.tasks) {
    used_ids.insert(ids.train_ids.begin(), ids.train_ids.end());
    used_ids.insert(ids.support_ids.begin(), ids.support_ids.end());
    used_ids.insert(ids.query_ids.begin(), ids.query_ids.end());
  }
  std::vector<std::string> missing;
  for (const auto& rec : records) {
    if (!used_ids.contains(rec.id)) continue;
    fs::path path = rec.segmap_path.starts_with("/") ? fs::path(rec.segmap_path)
                                                     : base / rec.segmap_path;
    if (!fs::exists(path)) missing.push_back(path.string());
  }
  if (!missing.empty()) {
    std::string message = "missing segmap files for the semantic branch:";
    const std::size_t shown = std::min<std::size_t>(missing.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) message += "\n  - " + missing[i];
    if (missing.size() > shown) {
      message += "\n  ... and " + std::to_string(missing.size() - shown) + " more";
    }
    throw DataError(message);
  }
}

std::string checkpoint_file(const std::string& task_name) {
  return task_name == "categorical" ? "checkpoint.json" : "checkpoint_" + task_name + ".json";
}

std::string history_file(const std::string& task_name) {
  return task_name == "categorical" ? "history.csv" : "history_" + task_name + ".csv";
}

std::string embeddings_file(const std::string& task_name) {
  return task_name == "categorical" ? "embeddings.csv" : "embeddings_" + task_name + ".csv";
}

int cmd_synth(const SynthConfig& synth_cfg, const std::string& out_dir) {
  const SynthData data = synth_clusters(synth_cfg);
  fs::create_directories(fs::path(out_dir) / "segmaps");
  for (const auto& rec : data.records) {
    save_segmap((fs::path(out_dir) / rec.segmap_path).string(), data.segmaps.at(rec.id));
  }
  const std::string records_path = (fs::path(out_dir) / "records.jsonl").string();
  save_records(records_path, data.records);
  std::cout << "wrote " << data.records.size() << " records and " << data.segmaps.size()
            << " segmaps under " << out_dir << "\n";
  return 0;
}

int cmd_split(const std::string& records_path, const std::string& split_name, std::uint64_t seed,
              const std::string& out_path) {
  const std::vector<FeatureRecord> records = load_records(records_path);
  const SplitSpec spec = split_by_name(split_name, seed);
  const Manifest manifest = build_manifest(records, spec);
  save_manifest(out_path, manifest);
  std::cout << "wrote manifest for " << spec.name << " (" << manifest.tasks.size()
            << " task(s)) to " << out_path << "\n";
  return 0;
}

int cmd_train(RunConfig cfg) {
  cfg.validate();
  {
    ProblemList missing;
    if (!fs::exists(cfg.records)) missing.add("records file not found: " + cfg.records);
    if (!fs::exists(cfg.manifest)) missing.add("manifest file not found: " + cfg.manifest);
    if (!missing.items.empty()) {
      std::string message = "missing inputs:";
      for (const auto& p : missing.items) message += "\n  - " + p;
      throw DataError(message);
    }
  }

  const std::vector<FeatureRecord> records = load_records(cfg.records);
  const Manifest manifest = load_manifest(cfg.manifest);
  const SplitSpec& spec = manifest.split;
  if (!cfg.lr_explicit) cfg.train.lr = spec.name == "LEV-6:4" ? 3.5e-6 : 3.5e-4;

  ModelConfig model_cfg = cfg.model;
  model_cfg.n_base_classes = spec.seen_classes.size();
  model_cfg.validate();
  cfg.train.validate();
  cfg.train.loss.validate(model_cfg.n_base_classes);

  std::vector<std::pair<std::string, OneShotTask>> jobs;
  for (const std::string& name : task_names(spec)) {
    const auto it = manifest.tasks.find(name);
    if (it == manifest.tasks.end()) throw DataError("manifest lacks task \"" + name + "\"");
    jobs.emplace_back(name, task_from_ids(records, it->second));
  }

  if (model_cfg.branches().sem) preflight_segmaps(manifest, records, cfg.records);
  std::unique_ptr<SemSource> sem = make_sem_source(model_cfg, cfg.records);

  fs::create_directories(cfg.out_dir);
  for (auto& [name, task] : jobs) {
    EmbedderModel model(model_cfg);
    Rng init = Rng(cfg.train.seed).substream("init");
    model.init(init);

    EpochHook hook;
    if (cfg.checkpoint_every_epochs > 0) {
      const std::string task_name = name;
      const std::string out_dir = cfg.out_dir;
      const std::size_t every = cfg.checkpoint_every_epochs;
      hook = [task_name, out_dir, every](std::size_t epoch, EmbedderModel& m) {
        if ((epoch + 1) % every != 0) return;
        const std::string stem =
            task_name == "categorical" ? "checkpoint" : "checkpoint_" + task_name;
        const std::string file = stem + "_epoch" + std::to_string(epoch + 1) + ".json";
        save_checkpoint((fs::path(out_dir) / file).string(), m);
      };
    }

    const TrainResult result =
        train(task, model, spec, cfg.train, sem.get(), dimension_for_task(name), hook);
    write_history_csv((fs::path(cfg.out_dir) / history_file(name)).string(), result.history);
    save_checkpoint((fs::path(cfg.out_dir) / checkpoint_file(name)).string(), model);

    std::cout << "trained " << name << ": " << result.history.size() << " steps";
    if (!result.history.empty()) {
      std::cout << ", final combined loss " << result.history.back().combined;
    }
    std::cout << "\n";
  }
  std::cout << "outputs in " << cfg.out_dir << "\n";
  return 0;
}

struct EvalInputs {
  std::vector<FeatureRecord> records;
  Manifest manifest;
};

EvalInputs load_eval_inputs(const std::string& records_path, const std::string& manifest_path) {
  EvalInputs in;
  in.records = load_records(records_path);
  in.manifest = load_manifest(manifest_path);
  return in;
}

EmbedderModel load_task_checkpoint(const std::string& checkpoint, const std::string& task_name) {
  if (task_name == "categorical") {
    if (fs::is_directory(checkpoint)) {
      return load_checkpoint((fs::path(checkpoint) / "checkpoint.json").string());
    }
    return load_checkpoint(checkpoint);
  }
  if (!fs::is_directory(checkpoint)) {
    throw DataError("level splits train one model per dimension; pass the training output "
                    "directory as --checkpoint, got " + checkpoint);
  }
  return load_checkpoint((fs::path(checkpoint) / checkpoint_file(task_name)).string());
}

void write_query_embeddings(const std::string& out_dir, const std::string& task_name,
                            const OneShotTask& task, const EmbedderModel& model,
                            const SplitSpec& spec, SemSource* sem) {
  const ModelInputs inputs = build_inputs(task.query_set, model.config(), sem);
  const Matrix embeddings = model.embed(inputs, nullptr);
  std::vector<std::size_t> classes;
  classes.reserve(task.query_set.size());
  for (const auto& rec : task.query_set) {
    classes.push_back(record_class(rec, spec, dimension_for_task(task_name)));
  }
  write_embeddings_csv((fs::path(out_dir) / embeddings_file(task_name)).string(), task.query_set,
                       classes, embeddings);
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest_path,
             const std::string& records_path, const std::string& out_dir, bool use_baseline,
             std::uint64_t baseline_seed) {
  const EvalInputs in = load_eval_inputs(records_path, manifest_path);
  const SplitSpec& spec = in.manifest.split;
  if (!use_baseline && checkpoint.empty()) {
    throw ValidationError("--checkpoint is required unless --random-baseline is set");
  }

  fs::create_directories(out_dir);
  std::map<std::string, EvalReport> reports;
  for (const std::string& name : task_names(spec)) {
    const OneShotTask task = task_from_ids(in.records, in.manifest.tasks.at(name));
    if (use_baseline) {
      reports[name] = random_baseline(task, spec, baseline_seed, dimension_for_task(name));
    } else {
      const EmbedderModel model = load_task_checkpoint(checkpoint, name);
      std::unique_ptr<SemSource> sem = make_sem_source(model.config(), records_path);
      reports[name] =
          evaluate(task, model, spec, sem.get(), dimension_for_task(name));
      write_query_embeddings(out_dir, name, task, model, spec, sem.get());
    }
  }

  const std::string report_path = (fs::path(out_dir) / "report.json").string();
  if (spec.is_level()) {
    const LevReport combined = combine_lev_reports(reports);
    write_text_file(report_path, lev_report_to_json(combined, spec));
    std::cout << "avg accuracy " << combined.avg_accuracy << " over "
              << reports.size() << " dimensions; report in " << report_path << "\n";
  } else {
    const EvalReport& report = reports.at("categorical");
    write_text_file(report_path, report_to_json(report, spec));
    std::cout << "accuracy " << report.accuracy << " (" << report.correct << "/" << report.total
              << "); report in " << report_path << "\n";
  }
  return 0;
}

int cmd_verify(bool flip_rule, bool corrupt_gradient, std::uint64_t seed) {
  VerifyOptions options;
  options.rule = flip_rule ? MinerRule::equation : MinerRule::prose;
  options.corrupt_gradient = corrupt_gradient;
  options.seed = seed;
  const VerifyReport report = run_verification(options);
  for (const CheckResult& check : report.checks) {
    std::cout << (check.passed ? "[PASS] " : "[FAIL] ") << check.name << ": " << check.detail
              << "\n";
  }
  if (!report.all_passed()) {
    std::cout << "verification FAILED\n";
    return 3;
  }
  std::cout << "verification passed\n";
  return 0;
}

int cmd_export_embeddings(const std::string& checkpoint, const std::string& records_path,
                          const std::string& manifest_path, const std::string& task_name,
                          const std::string& subset, const std::string& out_path) {
  const EvalInputs in = load_eval_inputs(records_path, manifest_path);
  const SplitSpec& spec = in.manifest.split;
  const auto it = in.manifest.tasks.find(task_name);
  if (it == in.manifest.tasks.end()) {
    std::string available;
    for (const std::string& name : task_names(spec)) {
      if (!available.empty()) available += ", ";
      available += name;
    }
    throw ValidationError("manifest has no task \"" + task_name + "\"; available: " + available);
  }

  TaskIds ids;
  if (subset == "train") {
    ids.train_ids = it->second.train_ids;
  } else if (subset == "support") {
    ids.support_ids = it->second.support_ids;
  } else if (subset == "query") {
    ids.query_ids = it->second.query_ids;
  } else if (subset == "all") {
    ids = it->second;
  } else {
    throw ValidationError("unknown subset \"" + subset +
                          "\"; expected train, support, query, or all");
  }
  const OneShotTask task = task_from_ids(in.records, ids);
  std::vector<FeatureRecord> selected;
  selected.insert(selected.end(), task.train_set.begin(), task.train_set.end());
  selected.insert(selected.end(), task.support_set.begin(), task.support_set.end());
  selected.insert(selected.end(), task.query_set.begin(), task.query_set.end());
  if (selected.empty()) throw DataError("selected subset is empty");

  const EmbedderModel model = load_task_checkpoint(checkpoint, task_name);
  std::unique_ptr<SemSource> sem = make_sem_source(model.config(), records_path);
  const ModelInputs inputs = build_inputs(selected, model.config(), sem.get());
  const Matrix embeddings = model.embed(inputs, nullptr);
  std::vector<std::size_t> classes;
  classes.reserve(selected.size());
  for (const auto& rec : selected) {
    classes.push_back(record_class(rec, spec, dimension_for_task(task_name)));
  }
  write_embeddings_csv(out_path, selected, classes, embeddings);
  std::cout << "wrote " << selected.size() << " embeddings to " << out_path << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"one-shot recognition over precomputed multi-branch features"};
  app.require_subcommand(1);
  int rc = 0;

  auto* synth = app.add_subcommand("synth", "generate a synthetic clustered dataset");
  SynthConfig synth_cfg;
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--classes", synth_cfg.n_classes, "number of classes");
  synth->add_option("--per-class", synth_cfg.per_class, "records per class");
  synth->add_option("--dim", synth_cfg.dim, "img/body feature dimension");
  synth->add_option("--sep", synth_cfg.sep, "cluster mean separation");
  synth->add_option("--noise", synth_cfg.noise_std, "cluster noise standard deviation");
  synth->add_option("--seed", synth_cfg.seed, "generator seed");
  synth->add_option("--n-sem", synth_cfg.n_sem, "semantic vocabulary size");
  synth->add_option("--distractors", synth_cfg.distractors, "distractor ids per segmap");
  synth->add_flag("--with-levels", synth_cfg.with_levels, "attach numeric level annotations");
  synth->callback([&]() { rc = cmd_synth(synth_cfg, synth_out); });

  auto* split = app.add_subcommand("split", "materialize a split into a task manifest");
  std::string split_records, split_name, split_out;
  std::uint64_t split_seed = 0;
  split->add_option("--records", split_records, "records JSONL path")->required();
  split->add_option("--split", split_name,
                    "split name (CAT-6:6, CAT-6:4, LEV-7:3, LEV-6:4, synth-<seen>:<novel>)")
      ->required();
  split->add_option("--seed", split_seed, "support selection seed");
  split->add_option("--out", split_out, "manifest output path")->required();
  split->callback([&]() { rc = cmd_split(split_records, split_name, split_seed, split_out); });

  auto* train_cmd = app.add_subcommand("train", "train a model from a run config");
  std::string train_config_path;
  std::string train_out_override;
  std::uint64_t train_seed_override = 0;
  std::size_t train_epochs_override = 0;
  double train_lr_override = 0.0;
  train_cmd->add_option("--config", train_config_path, "run config JSON path")->required();
  auto* opt_out = train_cmd->add_option("--out-dir", train_out_override, "override out_dir");
  auto* opt_seed = train_cmd->add_option("--seed", train_seed_override, "override train.seed");
  auto* opt_epochs =
      train_cmd->add_option("--epochs", train_epochs_override, "override train.epochs");
  auto* opt_lr = train_cmd->add_option("--lr", train_lr_override, "override train.lr");
  train_cmd->callback([&]() {
    RunConfig cfg = load_run_config(train_config_path);
    if (opt_out->count() > 0) cfg.out_dir = train_out_override;
    if (opt_seed->count() > 0) cfg.train.seed = train_seed_override;
    if (opt_epochs->count() > 0) cfg.train.epochs = train_epochs_override;
    if (opt_lr->count() > 0) {
      cfg.train.lr = train_lr_override;
      cfg.lr_explicit = true;
    }
    rc = cmd_train(std::move(cfg));
  });

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  std::string eval_checkpoint, eval_manifest, eval_records, eval_out;
  bool eval_baseline = false;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--checkpoint", eval_checkpoint,
                       "checkpoint file, or training output directory for level splits");
  eval_cmd->add_option("--manifest", eval_manifest, "manifest path")->required();
  eval_cmd->add_option("--records", eval_records, "records JSONL path")->required();
  eval_cmd->add_option("--out", eval_out, "output directory")->required();
  eval_cmd->add_flag("--random-baseline", eval_baseline, "score uniform class guesses instead");
  eval_cmd->add_option("--seed", eval_seed, "baseline seed");
  eval_cmd->callback([&]() {
    rc = cmd_eval(eval_checkpoint, eval_manifest, eval_records, eval_out, eval_baseline,
                  eval_seed);
  });

  auto* baseline_cmd = app.add_subcommand("baseline", "score the uniform random baseline");
  std::string base_manifest, base_records, base_out;
  std::uint64_t base_seed = 0;
  baseline_cmd->add_option("--manifest", base_manifest, "manifest path")->required();
  baseline_cmd->add_option("--records", base_records, "records JSONL path")->required();
  baseline_cmd->add_option("--out", base_out, "output directory")->required();
  baseline_cmd->add_option("--seed", base_seed, "baseline seed");
  baseline_cmd->callback(
      [&]() { rc = cmd_eval("", base_manifest, base_records, base_out, true, base_seed); });

  auto* verify_cmd = app.add_subcommand("verify", "run the self-check battery");
  bool verify_flip = false;
  bool verify_corrupt = false;
  std::uint64_t verify_seed = 0;
  verify_cmd->add_flag("--flip-miner-inequalities", verify_flip,
                       "check the flipped pair-filter comparisons against their own oracle");
  verify_cmd->add_flag("--corrupt-grad", verify_corrupt,
                       "perturb one analytic gradient by 1% to prove the check bites");
  verify_cmd->add_option("--seed", verify_seed, "battery seed");
  verify_cmd->callback([&]() { rc = cmd_verify(verify_flip, verify_corrupt, verify_seed); });

  auto* export_cmd = app.add_subcommand("export-embeddings", "embed records to a CSV table");
  std::string ex_checkpoint, ex_records, ex_manifest, ex_out;
  std::string ex_task = "categorical";
  std::string ex_subset = "all";
  export_cmd->add_option("--checkpoint", ex_checkpoint, "checkpoint file or directory")
      ->required();
  export_cmd->add_option("--records", ex_records, "records JSONL path")->required();
  export_cmd->add_option("--manifest", ex_manifest, "manifest path")->required();
  export_cmd->add_option("--task", ex_task, "task name (categorical or a dimension)");
  export_cmd->add_option("--subset", ex_subset, "train, support, query, or all");
  export_cmd->add_option("--out", ex_out, "CSV output path")->required();
  export_cmd->callback([&]() {
    rc = cmd_export_embeddings(ex_checkpoint, ex_records, ex_manifest, ex_task, ex_subset,
                               ex_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}

}  // namespace odml
