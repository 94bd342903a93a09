#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "odml/sem2vec.hpp"

namespace odml {

// One precomputed sample: feature vectors for the image and body branches,
// a path to the segmentation map, dataset labels, and optional
// valence/arousal/dominance levels in [1, 10].
struct FeatureRecord {
  std::string id;
  std::vector<std::string> labels;
  std::vector<double> img_feat;
  std::vector<double> body_feat;
  std::string segmap_path;
  std::optional<std::array<int, 3>> numeric_levels;
};

// Axis selector for level-based tasks; doubles as the index into
// numeric_levels.
enum class LevDimension { valence = 0, arousal = 1, dominance = 2 };

const char* lev_dimension_name(LevDimension dim);
LevDimension lev_dimension_from_name(const std::string& name);

// Benchmark split: which dataset labels fold into which coarse class, and
// which classes are seen (training) vs novel (one-shot).
struct SplitSpec {
  std::string name;
  std::string mode;  // "categorical" or "level"
  std::map<std::string, std::size_t> label2index;
  std::vector<std::size_t> seen_classes;
  std::vector<std::size_t> novel_classes;
  std::map<std::size_t, std::string> class_names;
  std::uint64_t support_seed = 0;

  bool is_level() const { return mode == "level"; }
  void validate() const;
};

// One-shot episode: seen-class training records, one support record per
// novel class, and the remaining novel-class records as queries.
struct OneShotTask {
  std::vector<FeatureRecord> train_set;
  std::vector<FeatureRecord> support_set;
  std::vector<FeatureRecord> query_set;
};

// Count votes per coarse class over the record's labels and take the argmax;
// ties go to the lowest class index.
std::size_t encode_label(const std::vector<std::string>& labels, const SplitSpec& spec);

// Class index of a record under the split: encode_label for categorical
// splits, the requested numeric level for level splits.
std::size_t record_class(const FeatureRecord& rec, const SplitSpec& spec,
                         LevDimension dim = LevDimension::valence);

// Built-in protocols: CAT-6:6, CAT-6:4, LEV-7:3, LEV-6:4.
SplitSpec build_split(const std::string& name, std::uint64_t support_seed = 0);

// Custom categorical split over synthetic classes "class0".."class{n-1}":
// the first n_seen are seen, the rest novel.
SplitSpec synth_split(std::size_t n_classes, std::size_t n_seen, std::uint64_t support_seed = 0);

OneShotTask assemble_task(const std::vector<FeatureRecord>& records, const SplitSpec& spec,
                          LevDimension dim = LevDimension::valence);

// Synthetic clustered data for desk-scale runs: per-class Gaussian feature
// clouds on orthogonal means of norm sep, and segmaps that always contain
// the class's own semantic id plus `distractors` draws from
// [n_classes, n_sem).
struct SynthConfig {
  std::size_t n_classes = 10;
  std::size_t per_class = 100;
  std::size_t dim = 16;
  double sep = 1.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
  std::size_t n_sem = 150;
  std::size_t distractors = 3;
  bool with_levels = false;

  void validate() const;
};

struct SynthData {
  std::vector<FeatureRecord> records;
  std::map<std::string, SegMap> segmaps;  // keyed by record id
};

SynthData synth_clusters(const SynthConfig& cfg);

// JSONL persistence: one record object per line with exactly the fields
// id, labels, img_feat, body_feat, segmap_path, numeric_levels.
std::vector<FeatureRecord> load_records(const std::string& path);
void save_records(const std::string& path, const std::vector<FeatureRecord>& records);

// SplitSpec persistence (single JSON document).
std::string split_to_json(const SplitSpec& spec);
SplitSpec split_from_json(const std::string& text, const std::string& origin = "<string>");
SplitSpec load_split(const std::string& path);
void save_split(const std::string& path, const SplitSpec& spec);

// Supplies the semantic presence vector for a record.
class SemSource {
 public:
  virtual ~SemSource() = default;
  virtual const std::vector<double>& sem_vector(const FeatureRecord& rec) = 0;
  virtual std::size_t n_sem() const = 0;
};

// Loads segmap files on demand, caching by path. Relative segmap paths
// resolve against base_dir.
class FileSemSource : public SemSource {
 public:
  FileSemSource(std::string base_dir, std::size_t n_sem);
  const std::vector<double>& sem_vector(const FeatureRecord& rec) override;
  std::size_t n_sem() const override { return n_sem_; }
  std::string resolve(const std::string& segmap_path) const;

 private:
  std::string base_dir_;
  std::size_t n_sem_;
  std::map<std::string, std::vector<double>> cache_;
};

// Serves segmaps from memory, keyed by record id; used with synth_clusters.
class MapSemSource : public SemSource {
 public:
  MapSemSource(std::map<std::string, SegMap> maps, std::size_t n_sem);
  const std::vector<double>& sem_vector(const FeatureRecord& rec) override;
  std::size_t n_sem() const override { return n_sem_; }

 private:
  std::map<std::string, SegMap> maps_;
  std::size_t n_sem_;
  std::map<std::string, std::vector<double>> cache_;
};

}  // namespace odml
