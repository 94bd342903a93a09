#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "odml/dataset.hpp"
#include "odml/matrix.hpp"
#include "odml/model.hpp"

namespace odml {

// One unit-norm embedding per novel class, rows sorted by class index.
struct SupportIndex {
  std::vector<std::size_t> classes;
  Matrix embeddings;  // row i belongs to classes[i]

  void validate() const;
};

SupportIndex build_support_index(std::vector<std::size_t> classes, Matrix embeddings);

// Nearest support embedding by Euclidean distance; ties go to the lowest
// class index.
std::size_t predict(std::span<const double> query, const SupportIndex& support);

struct EvalReport {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<std::size_t> classes;  // novel classes, ascending
  std::map<std::size_t, double> per_class_accuracy;
  std::map<std::size_t, std::map<std::size_t, std::size_t>> confusion;  // true -> pred -> count
};

// Embed the support set once, then classify every query by nearest support.
EvalReport evaluate(const OneShotTask& task, const EmbedderModel& model, const SplitSpec& spec,
                    SemSource* sem, LevDimension dim = LevDimension::valence);

// Uniform class guesses over the split's novel classes, same report shape.
EvalReport random_baseline(const OneShotTask& task, const SplitSpec& spec, std::uint64_t seed,
                           LevDimension dim = LevDimension::valence);

// Per-dimension reports plus their mean accuracy, for level-based protocols.
struct LevReport {
  std::map<std::string, EvalReport> per_dimension;
  double avg_accuracy = 0.0;
};

LevReport combine_lev_reports(const std::map<std::string, EvalReport>& per_dimension);

std::string report_to_json(const EvalReport& report, const SplitSpec& spec);
std::string lev_report_to_json(const LevReport& report, const SplitSpec& spec);

// CSV with header id,class,e0..e{D-1}; one row per record.
void write_embeddings_csv(const std::string& path, const std::vector<FeatureRecord>& records,
                          const std::vector<std::size_t>& classes, const Matrix& embeddings);

}  // namespace odml
