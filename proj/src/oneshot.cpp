#include "odml/oneshot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <utility>

#include "json.hpp"

#include "odml/error.hpp"
#include "odml/rng.hpp"

namespace odml {

namespace {

constexpr double kNormTolerance = 1e-9;

std::string class_display_name(std::size_t cls, const SplitSpec& spec) {
  auto it = spec.class_names.find(cls);
  if (it != spec.class_names.end()) return it->second;
  return std::to_string(cls);
}

}  // namespace

void SupportIndex::validate() const {
  if (classes.empty()) throw ValidationError("support index is empty");
  if (classes.size() != embeddings.rows()) {
    throw DimensionError("support index: " + std::to_string(classes.size()) + " classes vs " +
                         std::to_string(embeddings.rows()) + " embeddings");
  }
  for (std::size_t i = 1; i < classes.size(); ++i) {
    if (classes[i] <= classes[i - 1]) {
      throw ValidationError("support index classes must be strictly ascending");
    }
  }
  require_finite(embeddings, "support embeddings");
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    double sq = 0.0;
    for (double v : embeddings.row(i)) sq += v * v;
    if (std::fabs(std::sqrt(sq) - 1.0) > kNormTolerance) {
      throw ValidationError("support embedding for class " + std::to_string(classes[i]) +
                            " is not unit length");
    }
  }
}

SupportIndex build_support_index(std::vector<std::size_t> classes, Matrix embeddings) {
  if (classes.size() != embeddings.rows()) {
    throw DimensionError("build_support_index: " + std::to_string(classes.size()) +
                         " classes vs " + std::to_string(embeddings.rows()) + " embeddings");
  }
  std::vector<std::size_t> order(classes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&classes](std::size_t a, std::size_t b) { return classes[a] < classes[b]; });

  SupportIndex index;
  index.embeddings = Matrix(embeddings.rows(), embeddings.cols());
  index.classes.reserve(classes.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t src = order[i];
    if (!index.classes.empty() && classes[src] == index.classes.back()) {
      throw ValidationError("duplicate support class " + std::to_string(classes[src]));
    }
    index.classes.push_back(classes[src]);
    auto from = embeddings.row(src);
    std::copy(from.begin(), from.end(), index.embeddings.row(i).begin());
  }
  index.validate();
  return index;
}

std::size_t predict(std::span<const double> query, const SupportIndex& support) {
  support.validate();
  if (query.size() != support.embeddings.cols()) {
    throw DimensionError("predict: query has " + std::to_string(query.size()) +
                         " dims, support has " + std::to_string(support.embeddings.cols()));
  }
  std::size_t best = 0;
  double best_dist = squared_distance(query, support.embeddings.row(0));
  for (std::size_t i = 1; i < support.embeddings.rows(); ++i) {
    const double d = squared_distance(query, support.embeddings.row(i));
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return support.classes[best];
}

namespace {

EvalReport score_predictions(const std::vector<std::size_t>& truth,
                             const std::vector<std::size_t>& predicted,
                             const std::vector<std::size_t>& classes) {
  EvalReport report;
  report.classes = classes;
  std::sort(report.classes.begin(), report.classes.end());
  for (std::size_t c : report.classes) report.confusion[c];
  report.total = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    report.confusion[truth[i]][predicted[i]] += 1;
    if (truth[i] == predicted[i]) report.correct += 1;
  }
  report.accuracy =
      report.total == 0 ? 0.0 : static_cast<double>(report.correct) / static_cast<double>(report.total);
  for (const auto& [cls, row] : report.confusion) {
    std::size_t row_total = 0;
    std::size_t row_correct = 0;
    for (const auto& [pred, count] : row) {
      row_total += count;
      if (pred == cls) row_correct += count;
    }
    if (row_total > 0) {
      report.per_class_accuracy[cls] =
          static_cast<double>(row_correct) / static_cast<double>(row_total);
    }
  }
  return report;
}

std::vector<std::size_t> true_classes(const std::vector<FeatureRecord>& records,
                                      const SplitSpec& spec, LevDimension dim) {
  std::vector<std::size_t> out;
  out.reserve(records.size());
  for (const auto& rec : records) out.push_back(record_class(rec, spec, dim));
  return out;
}

}  // namespace

EvalReport evaluate(const OneShotTask& task, const EmbedderModel& model, const SplitSpec& spec,
                    SemSource* sem, LevDimension dim) {
  if (task.support_set.empty()) throw DataError("evaluate: empty support set");
  if (task.query_set.empty()) throw DataError("evaluate: empty query set");

  const auto support_classes = true_classes(task.support_set, spec, dim);
  const auto support_inputs = build_inputs(task.support_set, model.config(), sem);
  const Matrix support_emb = model.embed(support_inputs, nullptr);
  const SupportIndex index = build_support_index(support_classes, support_emb);

  const auto truth = true_classes(task.query_set, spec, dim);
  const auto query_inputs = build_inputs(task.query_set, model.config(), sem);
  const Matrix query_emb = model.embed(query_inputs, nullptr);

  std::vector<std::size_t> predicted;
  predicted.reserve(task.query_set.size());
  for (std::size_t i = 0; i < query_emb.rows(); ++i) {
    predicted.push_back(predict(query_emb.row(i), index));
  }
  return score_predictions(truth, predicted, index.classes);
}

EvalReport random_baseline(const OneShotTask& task, const SplitSpec& spec, std::uint64_t seed,
                           LevDimension dim) {
  if (task.query_set.empty()) throw DataError("random_baseline: empty query set");
  std::vector<std::size_t> novel = spec.novel_classes;
  std::sort(novel.begin(), novel.end());
  if (novel.empty()) throw ValidationError("random_baseline: split has no novel classes");

  const auto truth = true_classes(task.query_set, spec, dim);
  Rng rng = Rng(seed).substream("baseline");
  std::vector<std::size_t> predicted;
  predicted.reserve(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    predicted.push_back(novel[rng.below(novel.size())]);
  }
  return score_predictions(truth, predicted, novel);
}

LevReport combine_lev_reports(const std::map<std::string, EvalReport>& per_dimension) {
  if (per_dimension.empty()) throw ValidationError("combine_lev_reports: no dimension reports");
  LevReport out;
  out.per_dimension = per_dimension;
  double sum = 0.0;
  for (const auto& [name, report] : per_dimension) sum += report.accuracy;
  out.avg_accuracy = sum / static_cast<double>(per_dimension.size());
  return out;
}

namespace {

nlohmann::ordered_json report_json(const EvalReport& report, const SplitSpec& spec) {
  nlohmann::ordered_json j;
  j["accuracy"] = report.accuracy;
  j["correct"] = report.correct;
  j["total"] = report.total;
  j["classes"] = report.classes;
  nlohmann::ordered_json names = nlohmann::ordered_json::object();
  for (std::size_t c : report.classes) names[std::to_string(c)] = class_display_name(c, spec);
  j["class_names"] = names;
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (const auto& [cls, acc] : report.per_class_accuracy) per_class[std::to_string(cls)] = acc;
  j["per_class_accuracy"] = per_class;
  nlohmann::ordered_json confusion = nlohmann::ordered_json::object();
  for (const auto& [cls, row] : report.confusion) {
    nlohmann::ordered_json row_json = nlohmann::ordered_json::object();
    for (const auto& [pred, count] : row) row_json[std::to_string(pred)] = count;
    confusion[std::to_string(cls)] = row_json;
  }
  j["confusion"] = confusion;
  return j;
}

}  // namespace

std::string report_to_json(const EvalReport& report, const SplitSpec& spec) {
  nlohmann::ordered_json j;
  j["split"] = spec.name;
  j.update(report_json(report, spec));
  return j.dump(2) + "\n";
}

std::string lev_report_to_json(const LevReport& report, const SplitSpec& spec) {
  nlohmann::ordered_json j;
  j["split"] = spec.name;
  nlohmann::ordered_json dims = nlohmann::ordered_json::object();
  auto emit = [&](const std::string& name) {
    const auto it = report.per_dimension.find(name);
    if (it != report.per_dimension.end()) dims[name] = report_json(it->second, spec);
  };
  emit("valence");
  emit("arousal");
  emit("dominance");
  for (const auto& [name, dim_report] : report.per_dimension) {
    if (!dims.contains(name)) dims[name] = report_json(dim_report, spec);
  }
  j["dimensions"] = dims;
  j["avg_accuracy"] = report.avg_accuracy;
  return j.dump(2) + "\n";
}

void write_embeddings_csv(const std::string& path, const std::vector<FeatureRecord>& records,
                          const std::vector<std::size_t>& classes, const Matrix& embeddings) {
  if (records.size() != embeddings.rows() || classes.size() != embeddings.rows()) {
    throw DimensionError("write_embeddings_csv: row count mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << "id,class";
  for (std::size_t d = 0; d < embeddings.cols(); ++d) out << ",e" << d;
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    out << records[i].id << "," << classes[i];
    for (double v : embeddings.row(i)) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace odml
