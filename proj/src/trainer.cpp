#include "odml/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "odml/error.hpp"
#include "odml/mining.hpp"

namespace odml {

std::vector<std::string> TrainConfig::problems() const {
  std::vector<std::string> out;
  if (classes_per_batch * samples_per_class != batch_size) {
    out.push_back("classes_per_batch * samples_per_class must equal batch_size");
  }
  if (classes_per_batch < 2) {
    out.push_back("classes_per_batch must be at least 2 so batches hold negatives");
  }
  if (samples_per_class < 2) {
    out.push_back("samples_per_class must be at least 2 so batches hold positives");
  }
  if (!(lr > 0.0)) out.push_back("lr must be positive");
  if (!(lr_decay > 0.0)) out.push_back("lr_decay must be positive");
  if (decay_step_epochs == 0) out.push_back("decay_step_epochs must be positive");
  if (!(rmsprop_smoothing >= 0.0 && rmsprop_smoothing < 1.0)) {
    out.push_back("rmsprop_smoothing must lie in [0, 1)");
  }
  if (!(rmsprop_eps > 0.0)) out.push_back("rmsprop_eps must be positive");
  if (!(miner_epsilon >= 0.0)) out.push_back("miner_epsilon must be nonnegative");
  if (!(weight_decay >= 0.0)) out.push_back("weight_decay must be nonnegative");
  return out;
}

void TrainConfig::validate() const {
  const std::vector<std::string> found = problems();
  if (!found.empty()) {
    std::string message = "invalid training configuration:";
    for (const auto& p : found) message += "\n  - " + p;
    throw ValidationError(message);
  }
}

OptimizerState OptimizerState::for_params(std::span<const ParamRef> params) {
  OptimizerState state;
  state.accum.reserve(params.size());
  for (const ParamRef& p : params) {
    state.accum.emplace_back(p.value->rows(), p.value->cols());
  }
  return state;
}

void rmsprop_step(std::span<const ParamRef> params, OptimizerState& state, double lr,
                  double smoothing, double eps) {
  if (params.size() != state.accum.size()) {
    throw DimensionError("rmsprop_step: " + std::to_string(params.size()) + " params vs " +
                         std::to_string(state.accum.size()) + " accumulators");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& value = *params[i].value;
    const Matrix& grad = *params[i].grad;
    Matrix& v = state.accum[i];
    if (!value.same_shape(grad) || !value.same_shape(v)) {
      throw DimensionError("rmsprop_step: shape mismatch for " + params[i].name);
    }
    auto& vd = v.data();
    auto& pd = value.data();
    const auto& gd = grad.data();
    for (std::size_t k = 0; k < pd.size(); ++k) {
      vd[k] = smoothing * vd[k] + (1.0 - smoothing) * gd[k] * gd[k];
      pd[k] -= lr * gd[k] / (std::sqrt(vd[k]) + eps);
    }
  }
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
  const double power = static_cast<double>(epoch / config.decay_step_epochs);
  return config.lr * std::pow(config.lr_decay, power);
}

namespace {

std::map<std::size_t, std::vector<std::size_t>> group_by_class(
    const std::vector<FeatureRecord>& records, const SplitSpec& spec, LevDimension dim) {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    groups[record_class(records[i], spec, dim)].push_back(i);
  }
  return groups;
}

}  // namespace

std::vector<std::size_t> sample_batch(const std::vector<FeatureRecord>& train_set,
                                      const SplitSpec& spec, const TrainConfig& config, Rng& rng,
                                      LevDimension dim) {
  if (train_set.empty()) throw ValidationError("sample_batch: empty training set");
  const auto groups = group_by_class(train_set, spec, dim);
  if (groups.size() < 2) {
    throw ValidationError("sample_batch: need at least 2 classes in the training set, found " +
                          std::to_string(groups.size()));
  }
  std::vector<std::size_t> class_ids;
  class_ids.reserve(groups.size());
  for (const auto& [cls, members] : groups) class_ids.push_back(cls);

  std::vector<std::size_t> chosen_classes;
  chosen_classes.reserve(config.classes_per_batch);
  std::vector<std::size_t> pool;
  while (chosen_classes.size() < config.classes_per_batch) {
    if (pool.empty()) {
      pool = class_ids;
      rng.shuffle(pool);
    }
    chosen_classes.push_back(pool.back());
    pool.pop_back();
  }

  std::vector<std::size_t> batch;
  batch.reserve(config.batch_size);
  for (std::size_t cls : chosen_classes) {
    const auto& members = groups.at(cls);
    if (members.size() >= config.samples_per_class) {
      for (std::size_t j : rng.choose(members.size(), config.samples_per_class)) {
        batch.push_back(members[j]);
      }
    } else {
      for (std::size_t k = 0; k < config.samples_per_class; ++k) {
        batch.push_back(members[rng.below(members.size())]);
      }
    }
  }
  return batch;
}

TrainResult train(const OneShotTask& task, EmbedderModel& model, const SplitSpec& spec,
                  const TrainConfig& config, SemSource* sem, LevDimension dim,
                  const EpochHook& hook) {
  config.validate();
  config.loss.validate(model.config().n_base_classes);
  if (task.train_set.empty()) throw ValidationError("train: empty training set");

  std::vector<std::size_t> seen_sorted = spec.seen_classes;
  std::sort(seen_sorted.begin(), seen_sorted.end());
  if (model.config().n_base_classes != seen_sorted.size()) {
    throw ValidationError("train: model has " + std::to_string(model.config().n_base_classes) +
                          " base classes but the split has " +
                          std::to_string(seen_sorted.size()) + " seen classes");
  }
  std::map<std::size_t, std::size_t> class_to_target;
  for (std::size_t i = 0; i < seen_sorted.size(); ++i) class_to_target[seen_sorted[i]] = i;

  const std::size_t steps_per_epoch =
      std::max<std::size_t>(1, task.train_set.size() / config.batch_size);
  Rng rng = Rng(config.seed).substream("sampling");

  auto params = model.params();
  OptimizerState state = OptimizerState::for_params(params);

  TrainResult result;
  result.history.reserve(config.epochs * steps_per_epoch);
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config, epoch);
    for (std::size_t step = 0; step < steps_per_epoch; ++step, ++global_step) {
      const auto indices = sample_batch(task.train_set, spec, config, rng, dim);
      std::vector<FeatureRecord> records;
      records.reserve(indices.size());
      std::vector<std::size_t> targets;
      targets.reserve(indices.size());
      for (std::size_t idx : indices) {
        records.push_back(task.train_set[idx]);
        targets.push_back(class_to_target.at(record_class(task.train_set[idx], spec, dim)));
      }

      const ModelInputs inputs = build_inputs(records, model.config(), sem);
      Tape tape;
      Matrix embeddings = model.embed(inputs, &tape);
      Matrix logits = model.classify_logits(embeddings, &tape);

      EmbeddingBatch batch{embeddings, targets};
      const MinedPairs mined = ms_mine(batch, config.miner_epsilon);
      const std::vector<Triplet> triplets = assemble_triplets(mined);

      const TripletLossResult trip =
          triplet_loss(embeddings, triplets, config.loss.margin, config.loss.triplet_reduction);
      const CrossEntropyResult ce = cross_entropy(logits, targets, config.loss.class_weights);
      double combined = 0.0;
      try {
        combined = combined_loss(trip.value, ce.value, config.loss);
      } catch (const NumericError& e) {
        throw NumericError("training aborted at step " + std::to_string(global_step) +
                           ": triplet=" + std::to_string(trip.value) +
                           " ce=" + std::to_string(ce.value) + " (" + e.what() + ")");
      }

      Matrix d_embedding(embeddings.rows(), embeddings.cols());
      axpy(d_embedding, trip.embedding_grad, config.loss.alpha);
      Matrix d_logits(logits.rows(), logits.cols());
      axpy(d_logits, ce.logit_grad, config.loss.beta);

      model.zero_grad();
      model.backward(d_embedding, d_logits, tape);
      if (config.weight_decay > 0.0) {
        for (const ParamRef& p : params) axpy(*p.grad, *p.value, config.weight_decay);
      }
      rmsprop_step(params, state, lr, config.rmsprop_smoothing, config.rmsprop_eps);

      result.history.push_back({global_step, trip.value, ce.value, combined, lr});
    }
    if (hook) hook(epoch, model);
  }
  return result;
}

std::string history_to_csv(const std::vector<StepRecord>& history) {
  std::ostringstream out;
  out << "step,triplet,ce,combined,lr\n";
  char buf[64];
  for (const StepRecord& rec : history) {
    out << rec.step;
    for (double v : {rec.triplet, rec.ce, rec.combined, rec.lr}) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << "," << buf;
    }
    out << "\n";
  }
  return out.str();
}

void write_history_csv(const std::string& path, const std::vector<StepRecord>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << history_to_csv(history);
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace odml
