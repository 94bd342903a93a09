#include "odml/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "odml/error.hpp"
#include "odml/rng.hpp"

namespace odml {

using nlohmann::json;
using nlohmann::ordered_json;

const char* lev_dimension_name(LevDimension dim) {
  switch (dim) {
    case LevDimension::valence: return "valence";
    case LevDimension::arousal: return "arousal";
    case LevDimension::dominance: return "dominance";
  }
  throw ValidationError("unknown level dimension");
}

LevDimension lev_dimension_from_name(const std::string& name) {
  if (name == "valence") return LevDimension::valence;
  if (name == "arousal") return LevDimension::arousal;
  if (name == "dominance") return LevDimension::dominance;
  throw ValidationError("unknown level dimension '" + name +
                        "' (expected valence, arousal, or dominance)");
}

void SplitSpec::validate() const {
  if (name.empty()) throw ValidationError("split: name must not be empty");
  if (mode != "categorical" && mode != "level") {
    throw ValidationError("split '" + name + "': mode must be 'categorical' or 'level', got '" +
                          mode + "'");
  }
  if (seen_classes.empty()) throw ValidationError("split '" + name + "': no seen classes");
  if (novel_classes.empty()) throw ValidationError("split '" + name + "': no novel classes");

  std::set<std::size_t> seen(seen_classes.begin(), seen_classes.end());
  std::set<std::size_t> novel(novel_classes.begin(), novel_classes.end());
  if (seen.size() != seen_classes.size() || novel.size() != novel_classes.size()) {
    throw ValidationError("split '" + name + "': duplicate class in seen or novel list");
  }
  for (std::size_t c : novel) {
    if (seen.count(c)) {
      throw ValidationError("split '" + name + "': class " + std::to_string(c) +
                            " is both seen and novel");
    }
  }

  std::set<std::size_t> mapped;
  for (const auto& [label, cls] : label2index) {
    if (!seen.count(cls) && !novel.count(cls)) {
      throw ValidationError("split '" + name + "': label '" + label + "' maps to class " +
                            std::to_string(cls) + " which is neither seen nor novel");
    }
    mapped.insert(cls);
  }
  for (std::size_t c : seen_classes) {
    if (!mapped.count(c)) {
      throw ValidationError("split '" + name + "': seen class " + std::to_string(c) +
                            " has no label mapping to it");
    }
  }
  for (std::size_t c : novel_classes) {
    if (!mapped.count(c)) {
      throw ValidationError("split '" + name + "': novel class " + std::to_string(c) +
                            " has no label mapping to it");
    }
  }
  if (!class_names.empty()) {
    for (std::size_t c : seen_classes) {
      if (!class_names.count(c)) {
        throw ValidationError("split '" + name + "': missing name for class " + std::to_string(c));
      }
    }
    for (std::size_t c : novel_classes) {
      if (!class_names.count(c)) {
        throw ValidationError("split '" + name + "': missing name for class " + std::to_string(c));
      }
    }
  }
}

std::size_t encode_label(const std::vector<std::string>& labels, const SplitSpec& spec) {
  if (labels.empty()) throw ValidationError("encode_label: record has no labels");
  std::map<std::size_t, std::size_t> counts;
  for (const std::string& label : labels) {
    auto it = spec.label2index.find(label);
    if (it == spec.label2index.end()) {
      throw ValidationError("encode_label: label '" + label + "' is not mapped by split '" +
                            spec.name + "'");
    }
    ++counts[it->second];
  }
  std::size_t best_class = 0, best_count = 0;
  for (const auto& [cls, count] : counts) {  // ascending class order, so ties keep the lowest
    if (count > best_count) {
      best_count = count;
      best_class = cls;
    }
  }
  return best_class;
}

std::size_t record_class(const FeatureRecord& rec, const SplitSpec& spec, LevDimension dim) {
  if (!spec.is_level()) return encode_label(rec.labels, spec);
  if (!rec.numeric_levels.has_value()) {
    throw DataError("record '" + rec.id + "' has no numeric levels but split '" + spec.name +
                    "' needs them");
  }
  const int v = (*rec.numeric_levels)[static_cast<int>(dim)];
  if (v < 1 || v > 10) {
    throw ValidationError("record '" + rec.id + "': " + lev_dimension_name(dim) + " level " +
                          std::to_string(v) + " outside [1,10]");
  }
  const std::size_t cls = static_cast<std::size_t>(v);
  const bool known =
      std::count(spec.seen_classes.begin(), spec.seen_classes.end(), cls) > 0 ||
      std::count(spec.novel_classes.begin(), spec.novel_classes.end(), cls) > 0;
  if (!known) {
    throw ValidationError("record '" + rec.id + "': level " + std::to_string(v) +
                          " is not covered by split '" + spec.name + "'");
  }
  return cls;
}

namespace {

SplitSpec categorical_base(std::uint64_t support_seed) {
  SplitSpec s;
  s.mode = "categorical";
  s.support_seed = support_seed;
  s.seen_classes = {0, 1, 2, 3, 4, 5};
  s.class_names = {{0, "Angry"},  {1, "Sadness"}, {2, "Fear"},
                   {3, "Love"},   {4, "Joy"},     {5, "Surprising"}};
  s.label2index = {
      {"Disapproval", 0}, {"Aversion", 0},     {"Annoyance", 0},  {"Anger", 0},
      {"Suffering", 1},   {"Sadness", 1},      {"Fatigue", 1},    {"Pain", 1},
      {"Fear", 2},        {"Disquitement", 2},
      {"Peace", 3},       {"Affection", 3},    {"Sympathy", 3},
      {"Happiness", 4},   {"Pleasure", 4},     {"Excitement", 4}, {"Anticipation", 4},
      {"Surprising", 5},  {"Confuse/Doubt", 5}, {"Confidence", 5},
  };
  return s;
}

SplitSpec level_split(const std::string& name, std::vector<std::size_t> seen,
                      std::vector<std::size_t> novel, std::uint64_t support_seed) {
  SplitSpec s;
  s.name = name;
  s.mode = "level";
  s.support_seed = support_seed;
  s.seen_classes = std::move(seen);
  s.novel_classes = std::move(novel);
  for (std::size_t level = 1; level <= 10; ++level) {
    s.label2index[std::to_string(level)] = level;
    s.class_names[level] = std::to_string(level);
  }
  return s;
}

}  // namespace

SplitSpec build_split(const std::string& name, std::uint64_t support_seed) {
  if (name == "CAT-6:6") {
    SplitSpec s = categorical_base(support_seed);
    s.name = name;
    s.novel_classes = {6, 7, 8, 9, 10, 11};
    s.label2index["Disconnection"] = 6;
    s.label2index["Engagement"] = 7;
    s.label2index["Sensitive"] = 8;
    s.label2index["Embarrassment"] = 9;
    s.label2index["Esteem"] = 10;
    s.label2index["Yearning"] = 11;
    s.class_names[6] = "Disconnection";
    s.class_names[7] = "Engagement";
    s.class_names[8] = "Sensitive";
    s.class_names[9] = "Embarrassment";
    s.class_names[10] = "Esteem";
    s.class_names[11] = "Yearning";
    s.validate();
    return s;
  }
  if (name == "CAT-6:4") {
    SplitSpec s = categorical_base(support_seed);
    s.name = name;
    s.novel_classes = {6, 7, 8, 9};
    s.label2index["Sensitive"] = 1;
    s.label2index["Embarrassment"] = 1;
    s.label2index["Disconnection"] = 6;
    s.label2index["Engagement"] = 7;
    s.label2index["Esteem"] = 8;
    s.label2index["Yearning"] = 9;
    s.class_names[6] = "Disconnection";
    s.class_names[7] = "Engagement";
    s.class_names[8] = "Esteem";
    s.class_names[9] = "Yearning";
    s.validate();
    return s;
  }
  if (name == "LEV-7:3") {
    SplitSpec s = level_split(name, {1, 3, 5, 6, 8, 9, 10}, {2, 4, 7}, support_seed);
    s.validate();
    return s;
  }
  if (name == "LEV-6:4") {
    SplitSpec s = level_split(name, {1, 3, 5, 6, 8, 9}, {2, 4, 7, 10}, support_seed);
    s.validate();
    return s;
  }
  throw ValidationError("unknown split '" + name +
                        "' (expected CAT-6:6, CAT-6:4, LEV-7:3, or LEV-6:4)");
}

SplitSpec synth_split(std::size_t n_classes, std::size_t n_seen, std::uint64_t support_seed) {
  if (n_seen == 0 || n_seen >= n_classes) {
    throw ValidationError("synth_split: need 0 < n_seen < n_classes, got " +
                          std::to_string(n_seen) + " of " + std::to_string(n_classes));
  }
  SplitSpec s;
  s.name = "synth-" + std::to_string(n_seen) + ":" + std::to_string(n_classes - n_seen);
  s.mode = "categorical";
  s.support_seed = support_seed;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const std::string label = "class" + std::to_string(c);
    s.label2index[label] = c;
    s.class_names[c] = label;
    if (c < n_seen) {
      s.seen_classes.push_back(c);
    } else {
      s.novel_classes.push_back(c);
    }
  }
  s.validate();
  return s;
}

OneShotTask assemble_task(const std::vector<FeatureRecord>& records, const SplitSpec& spec,
                          LevDimension dim) {
  spec.validate();
  std::set<std::size_t> seen(spec.seen_classes.begin(), spec.seen_classes.end());
  std::set<std::size_t> novel(spec.novel_classes.begin(), spec.novel_classes.end());

  std::vector<std::size_t> train_idx, novel_idx;
  std::map<std::size_t, std::size_t> novel_counts;
  std::map<std::size_t, std::size_t> seen_counts;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::size_t cls = record_class(records[i], spec, dim);
    if (seen.count(cls)) {
      train_idx.push_back(i);
      ++seen_counts[cls];
    } else {
      novel_idx.push_back(i);
      ++novel_counts[cls];
    }
  }

  for (std::size_t c : spec.seen_classes) {
    if (!seen_counts.count(c)) {
      throw DataError("split '" + spec.name + "': seen class " + std::to_string(c) +
                      " has no records");
    }
  }
  for (std::size_t c : spec.novel_classes) {
    if (novel_counts[c] < 2) {
      throw DataError("split '" + spec.name + "': novel class " + std::to_string(c) + " has " +
                      std::to_string(novel_counts[c]) + " records, need at least 2");
    }
  }

  Rng rng = Rng(spec.support_seed).substream("support");
  rng.shuffle(novel_idx);

  std::map<std::size_t, std::size_t> support_pick;  // class -> record index
  std::vector<std::size_t> query_idx;
  for (std::size_t i : novel_idx) {
    const std::size_t cls = record_class(records[i], spec, dim);
    if (!support_pick.count(cls)) {
      support_pick[cls] = i;
    } else {
      query_idx.push_back(i);
    }
  }

  OneShotTask task;
  for (std::size_t i : train_idx) task.train_set.push_back(records[i]);
  for (std::size_t c : spec.novel_classes) task.support_set.push_back(records[support_pick[c]]);
  for (std::size_t i : query_idx) task.query_set.push_back(records[i]);
  return task;
}

void SynthConfig::validate() const {
  if (n_classes < 2) throw ValidationError("synth: need at least 2 classes");
  if (per_class < 1) throw ValidationError("synth: per_class must be positive");
  if (dim < n_classes) {
    throw ValidationError("synth: dim " + std::to_string(dim) + " too small for " +
                          std::to_string(n_classes) + " orthogonal class means");
  }
  if (!(sep > 0.0)) throw ValidationError("synth: sep must be positive");
  if (noise_std < 0.0) throw ValidationError("synth: noise_std must be nonnegative");
  if (distractors > 0 && n_sem <= n_classes) {
    throw ValidationError("synth: n_sem must exceed n_classes to leave a distractor pool");
  }
  if (n_sem < n_classes) throw ValidationError("synth: n_sem smaller than the class count");
}

SynthData synth_clusters(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng = Rng(cfg.seed).substream("synth");
  SynthData out;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    for (std::size_t r = 0; r < cfg.per_class; ++r) {
      FeatureRecord rec;
      char id[32];
      std::snprintf(id, sizeof(id), "c%02zu_r%04zu", c, r);
      rec.id = id;
      rec.labels = {"class" + std::to_string(c)};
      rec.img_feat.resize(cfg.dim);
      rec.body_feat.resize(cfg.dim);
      for (std::size_t d = 0; d < cfg.dim; ++d) {
        const double mean = (d == c) ? cfg.sep : 0.0;
        rec.img_feat[d] = mean + cfg.noise_std * rng.gaussian();
      }
      for (std::size_t d = 0; d < cfg.dim; ++d) {
        const double mean = (d == c) ? cfg.sep : 0.0;
        rec.body_feat[d] = mean + cfg.noise_std * rng.gaussian();
      }
      std::set<std::size_t> signature{c};
      for (std::size_t k = 0; k < cfg.distractors; ++k) {
        signature.insert(cfg.n_classes + rng.below(cfg.n_sem - cfg.n_classes));
      }
      SegMap map;
      map.height = 1;
      map.width = signature.size();
      map.n_sem = cfg.n_sem;
      map.cells.assign(signature.begin(), signature.end());
      rec.segmap_path = "segmaps/" + rec.id + ".txt";
      if (cfg.with_levels) {
        rec.numeric_levels = {{static_cast<int>(1 + c % 10), static_cast<int>(1 + (c + 3) % 10),
                               static_cast<int>(1 + (c + 7) % 10)}};
      }
      out.segmaps[rec.id] = std::move(map);
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

namespace {

std::vector<double> parse_feat(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": " + key + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw ParseError(where + ": " + key + " must contain only numbers");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ParseError(where + ": " + key + " has a non-finite entry");
    out.push_back(x);
  }
  return out;
}

FeatureRecord record_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": record line is not a JSON object");
  static const std::set<std::string> known = {"id",        "labels",      "img_feat",
                                             "body_feat", "segmap_path", "numeric_levels"};
  std::string unknown;
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw ParseError(where + ": unknown record fields: " + unknown);
  for (const char* key : {"id", "labels", "img_feat", "body_feat", "segmap_path"}) {
    if (!j.contains(key)) throw ParseError(where + ": missing field '" + std::string(key) + "'");
  }

  FeatureRecord rec;
  if (!j["id"].is_string() || j["id"].get<std::string>().empty()) {
    throw ParseError(where + ": id must be a non-empty string");
  }
  rec.id = j["id"].get<std::string>();
  if (!j["labels"].is_array()) throw ParseError(where + ": labels must be an array");
  for (const auto& l : j["labels"]) {
    if (!l.is_string()) throw ParseError(where + ": labels must contain only strings");
    rec.labels.push_back(l.get<std::string>());
  }
  rec.img_feat = parse_feat(j["img_feat"], "img_feat", where);
  rec.body_feat = parse_feat(j["body_feat"], "body_feat", where);
  if (!j["segmap_path"].is_string()) throw ParseError(where + ": segmap_path must be a string");
  rec.segmap_path = j["segmap_path"].get<std::string>();

  if (j.contains("numeric_levels") && !j["numeric_levels"].is_null()) {
    const json& nl = j["numeric_levels"];
    if (!nl.is_array() || nl.size() != 3) {
      throw ParseError(where + ": numeric_levels must be null or a 3-element array");
    }
    std::array<int, 3> levels{};
    for (std::size_t i = 0; i < 3; ++i) {
      if (!nl[i].is_number_integer()) {
        throw ParseError(where + ": numeric_levels entries must be integers");
      }
      const int v = nl[i].get<int>();
      if (v < 1 || v > 10) {
        throw ParseError(where + ": numeric level " + std::to_string(v) + " outside [1,10]");
      }
      levels[i] = v;
    }
    rec.numeric_levels = levels;
  }
  return rec;
}

}  // namespace

std::vector<FeatureRecord> load_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open record file '" + path + "'");
  std::vector<FeatureRecord> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    FeatureRecord rec = record_from_json(j, where);
    if (!ids.insert(rec.id).second) {
      throw DataError(where + ": duplicate record id '" + rec.id + "'");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void save_records(const std::string& path, const std::vector<FeatureRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write record file '" + path + "'");
  for (const FeatureRecord& rec : records) {
    ordered_json j;
    j["id"] = rec.id;
    j["labels"] = rec.labels;
    j["img_feat"] = rec.img_feat;
    j["body_feat"] = rec.body_feat;
    j["segmap_path"] = rec.segmap_path;
    if (rec.numeric_levels.has_value()) {
      j["numeric_levels"] = *rec.numeric_levels;
    } else {
      j["numeric_levels"] = nullptr;
    }
    out << j.dump() << '\n';
  }
  if (!out.flush()) throw ParseError("failed writing record file '" + path + "'");
}

std::string split_to_json(const SplitSpec& spec) {
  ordered_json j;
  j["name"] = spec.name;
  j["label2index"] = json::object();
  for (const auto& [label, cls] : spec.label2index) j["label2index"][label] = cls;
  j["seen_classes"] = spec.seen_classes;
  j["novel_classes"] = spec.novel_classes;
  j["support_seed"] = spec.support_seed;
  j["mode"] = spec.mode;
  j["class_names"] = json::object();
  for (const auto& [cls, name] : spec.class_names) j["class_names"][std::to_string(cls)] = name;
  return j.dump(2) + "\n";
}

SplitSpec split_from_json(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(origin + ": split document is not a JSON object");
  static const std::set<std::string> known = {"name",          "label2index",  "seen_classes",
                                             "novel_classes", "support_seed", "mode",
                                             "class_names"};
  std::string unknown;
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw ParseError(origin + ": unknown split fields: " + unknown);
  for (const char* key : {"name", "label2index", "seen_classes", "novel_classes", "support_seed"}) {
    if (!j.contains(key)) throw ParseError(origin + ": missing field '" + std::string(key) + "'");
  }

  SplitSpec s;
  try {
    s.name = j["name"].get<std::string>();
    for (const auto& [label, cls] : j["label2index"].items()) {
      s.label2index[label] = cls.get<std::size_t>();
    }
    s.seen_classes = j["seen_classes"].get<std::vector<std::size_t>>();
    s.novel_classes = j["novel_classes"].get<std::vector<std::size_t>>();
    s.support_seed = j["support_seed"].get<std::uint64_t>();
    s.mode = j.contains("mode") ? j["mode"].get<std::string>() : std::string("categorical");
    if (j.contains("class_names")) {
      for (const auto& [cls, name] : j["class_names"].items()) {
        s.class_names[std::stoull(cls)] = name.get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }
  s.validate();
  return s;
}

SplitSpec load_split(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open split file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return split_from_json(buf.str(), path);
}

void save_split(const std::string& path, const SplitSpec& spec) {
  spec.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write split file '" + path + "'");
  out << split_to_json(spec);
  if (!out.flush()) throw ParseError("failed writing split file '" + path + "'");
}

FileSemSource::FileSemSource(std::string base_dir, std::size_t n_sem)
    : base_dir_(std::move(base_dir)), n_sem_(n_sem) {
  if (n_sem_ == 0) throw ValidationError("FileSemSource: n_sem must be positive");
}

std::string FileSemSource::resolve(const std::string& segmap_path) const {
  if (segmap_path.empty()) return segmap_path;
  if (segmap_path.front() == '/' || base_dir_.empty()) return segmap_path;
  return base_dir_ + "/" + segmap_path;
}

const std::vector<double>& FileSemSource::sem_vector(const FeatureRecord& rec) {
  if (rec.segmap_path.empty()) {
    throw DataError("record '" + rec.id + "' has no segmap path");
  }
  const std::string path = resolve(rec.segmap_path);
  auto it = cache_.find(path);
  if (it != cache_.end()) return it->second;
  SegMap map = load_segmap(path);
  if (map.n_sem != n_sem_) {
    throw DataError("segmap '" + path + "' declares " + std::to_string(map.n_sem) +
                    " classes, expected " + std::to_string(n_sem_));
  }
  return cache_.emplace(path, sem2vec(map).values).first->second;
}

MapSemSource::MapSemSource(std::map<std::string, SegMap> maps, std::size_t n_sem)
    : maps_(std::move(maps)), n_sem_(n_sem) {
  if (n_sem_ == 0) throw ValidationError("MapSemSource: n_sem must be positive");
}

const std::vector<double>& MapSemSource::sem_vector(const FeatureRecord& rec) {
  auto hit = cache_.find(rec.id);
  if (hit != cache_.end()) return hit->second;
  auto it = maps_.find(rec.id);
  if (it == maps_.end()) {
    throw DataError("no segmap registered for record '" + rec.id + "'");
  }
  if (it->second.n_sem != n_sem_) {
    throw DataError("segmap for record '" + rec.id + "' declares " +
                    std::to_string(it->second.n_sem) + " classes, expected " +
                    std::to_string(n_sem_));
  }
  return cache_.emplace(rec.id, sem2vec(it->second).values).first->second;
}

}  // namespace odml
