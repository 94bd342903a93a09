#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "odml/dataset.hpp"
#include "odml/layers.hpp"
#include "odml/losses.hpp"
#include "odml/matrix.hpp"
#include "odml/model.hpp"
#include "odml/rng.hpp"

namespace odml {

struct TrainConfig {
  double lr = 3.5e-4;
  std::size_t batch_size = 32;
  std::size_t classes_per_batch = 8;   // P
  std::size_t samples_per_class = 4;   // K
  std::size_t epochs = 0;
  double lr_decay = 0.1;
  std::size_t decay_step_epochs = 4;
  double rmsprop_smoothing = 0.99;
  double rmsprop_eps = 1e-8;
  std::uint64_t seed = 0;
  LossConfig loss;
  double miner_epsilon = 0.1;
  double weight_decay = 0.0;  // L2 penalty coefficient; 0 disables

  std::vector<std::string> problems() const;
  void validate() const;  // throws with every problem listed
};

struct OptimizerState {
  std::vector<Matrix> accum;  // one running mean-square per parameter

  static OptimizerState for_params(std::span<const ParamRef> params);
};

// v <- s*v + (1-s)*g^2; p <- p - lr*g/(sqrt(v)+eps), elementwise.
void rmsprop_step(std::span<const ParamRef> params, OptimizerState& state, double lr,
                  double smoothing, double eps);

double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

// Class-balanced batch: P distinct classes (cycles through reshuffled class
// pools when fewer than P exist), K records per class, records drawn with
// replacement when a class holds fewer than K. Returns indices into
// train_set.
std::vector<std::size_t> sample_batch(const std::vector<FeatureRecord>& train_set,
                                      const SplitSpec& spec, const TrainConfig& config, Rng& rng,
                                      LevDimension dim = LevDimension::valence);

struct StepRecord {
  std::size_t step = 0;
  double triplet = 0.0;
  double ce = 0.0;
  double combined = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<StepRecord> history;
};

using EpochHook = std::function<void(std::size_t epoch, EmbedderModel& model)>;

// One optimization run: per step embed the batch, mine pairs, build triplets,
// take the weighted triplet + cross-entropy loss, backpropagate, and apply an
// RMSprop update under the stepped learning-rate schedule. Deterministic for
// a fixed seed. A non-finite loss aborts with the step index and components.
TrainResult train(const OneShotTask& task, EmbedderModel& model, const SplitSpec& spec,
                  const TrainConfig& config, SemSource* sem,
                  LevDimension dim = LevDimension::valence, const EpochHook& hook = {});

std::string history_to_csv(const std::vector<StepRecord>& history);
void write_history_csv(const std::string& path, const std::vector<StepRecord>& history);

}  // namespace odml
