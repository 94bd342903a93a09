#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "odml/dataset.hpp"
#include "odml/model.hpp"
#include "odml/trainer.hpp"

namespace odml {

struct TaskIds {
  std::vector<std::string> train_ids;
  std::vector<std::string> support_ids;
  std::vector<std::string> query_ids;
};

// Split plus the realized record partition. Categorical splits hold one task
// under "categorical"; level splits hold one per dimension name.
struct Manifest {
  SplitSpec split;
  std::map<std::string, TaskIds> tasks;
};

Manifest build_manifest(const std::vector<FeatureRecord>& records, const SplitSpec& spec);
std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const std::string& text, const std::string& origin = "<string>");
Manifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const Manifest& manifest);

OneShotTask task_from_ids(const std::vector<FeatureRecord>& records, const TaskIds& ids);

// Built-in protocol names plus "synth-<seen>:<novel>".
SplitSpec split_by_name(const std::string& name, std::uint64_t support_seed);

struct RunConfig {
  std::string records;
  std::string manifest;
  std::string out_dir;
  ModelConfig model;       // n_base_classes is derived from the split later
  TrainConfig train;
  bool lr_explicit = false;  // absent lr falls back to the split's preset
  std::size_t checkpoint_every_epochs = 0;  // 0 = final checkpoint only

  void validate() const;  // reports every problem in one error
};

RunConfig run_config_from_json(const std::string& text, const std::string& origin = "<string>");
RunConfig load_run_config(const std::string& path);

int run_cli(int argc, const char* const* argv);

}  // namespace odml
