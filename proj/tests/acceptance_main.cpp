#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "odml/dataset.hpp"
#include "odml/error.hpp"
#include "odml/model.hpp"
#include "odml/oneshot.hpp"
#include "odml/rng.hpp"
#include "odml/trainer.hpp"
#include "odml/verify.hpp"

namespace fs = std::filesystem;
using namespace odml;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

const CheckResult& named_check(const VerifyReport& report, const std::string& name) {
  for (const CheckResult& check : report.checks) {
    if (check.name == name) return check;
  }
  throw ValidationError("verification battery lacks check " + name);
}

// Shared battery run backing the first three criteria; the total elapsed time
// bounds each criterion's own share from above.
struct BatteryRun {
  VerifyReport report;
  double elapsed = 0.0;
};

const BatteryRun& battery() {
  static const BatteryRun run = [] {
    BatteryRun r;
    const auto start = std::chrono::steady_clock::now();
    VerifyOptions options;
    options.seed = 0;
    options.miner_batches = 200;
    options.grad_instances = 50;
    r.report = run_verification(options);
    r.elapsed = seconds_since(start);
    return r;
  }();
  return run;
}

Outcome check_miner_oracle() {
  const BatteryRun& run = battery();
  const CheckResult& check = named_check(run.report, "miner-oracle-equivalence");
  Outcome out;
  out.passed = check.passed && run.elapsed < 10.0;
  out.detail = check.detail + fmt(", battery took %.2f s (budget 10 s)", run.elapsed);
  return out;
}

Outcome check_gradient_fidelity() {
  const BatteryRun& run = battery();
  const CheckResult& check = named_check(run.report, "gradient-fidelity");
  Outcome out;
  out.passed = check.passed && run.elapsed < 60.0;
  out.detail = check.detail + fmt(", battery took %.2f s (budget 60 s)", run.elapsed);
  return out;
}

Outcome check_bayes_equivalence() {
  const BatteryRun& run = battery();
  const CheckResult& check = named_check(run.report, "nearest-neighbor-bayes-equivalence");
  return {check.passed, check.detail};
}

Outcome check_random_baseline() {
  SynthConfig cfg;
  cfg.n_classes = 12;
  cfg.per_class = 200;
  cfg.dim = 12;
  cfg.sep = 1.0;
  cfg.noise_std = 1.0;
  cfg.seed = 7;
  cfg.n_sem = 20;
  cfg.distractors = 2;
  const SynthData data = synth_clusters(cfg);
  const SplitSpec spec = synth_split(12, 6, 3);
  const OneShotTask task = assemble_task(data.records, spec);

  const EvalReport report = random_baseline(task, spec, 5);
  const double p = 1.0 / 6.0;
  const double n = static_cast<double>(report.total);
  const double band = 3.0 * std::sqrt(p * (1.0 - p) / n);
  Outcome out;
  out.passed = report.total >= 1000 && std::abs(report.accuracy - p) <= band;
  out.detail = fmt("accuracy %.4f on ", report.accuracy) + std::to_string(report.total) +
               fmt(" queries, chance %.4f, tolerance %.4f", p, band);
  return out;
}

struct TrainedEval {
  double untrained = 0.0;
  double trained = 0.0;
};

TrainedEval train_and_eval(const SynthData& data, const SplitSpec& spec,
                           const std::string& variant, std::size_t epochs,
                           std::uint64_t train_seed) {
  const OneShotTask task = assemble_task(data.records, spec);
  MapSemSource sem(data.segmaps, 150);

  ModelConfig mc;
  mc.variant = variant;
  mc.d_img = 16;
  mc.d_body = 16;
  mc.n_sem = 150;
  mc.n_base_classes = spec.seen_classes.size();
  EmbedderModel model(mc);
  Rng init = Rng(train_seed).substream("init");
  model.init(init);

  TrainedEval result;
  result.untrained = evaluate(task, model, spec, &sem).accuracy;

  TrainConfig tc;
  tc.epochs = epochs;
  tc.seed = train_seed;
  train(task, model, spec, tc, &sem);
  result.trained = evaluate(task, model, spec, &sem).accuracy;
  return result;
}

Outcome check_oneshot_end_to_end() {
  const auto start = std::chrono::steady_clock::now();
  SynthConfig cfg;
  cfg.n_classes = 10;
  cfg.per_class = 200;
  cfg.dim = 16;
  cfg.sep = 10.0;
  cfg.noise_std = 0.3;
  cfg.seed = 42;
  const SynthData data = synth_clusters(cfg);
  const SplitSpec spec = synth_split(10, 6, 1);

  const TrainedEval run = train_and_eval(data, spec, "Sem-IB-DML", 20, 1);
  const double elapsed = seconds_since(start);

  const bool absolute = run.trained >= 0.80;
  const bool improved = run.trained >= run.untrained + 0.20;
  const bool in_time = elapsed < 300.0;
  Outcome out;
  out.passed = absolute && improved && in_time;
  out.detail = fmt("trained %.3f (needs >= 0.800), untrained %.3f", run.trained, run.untrained) +
               fmt(" (needs improvement >= 0.200, got %+.3f), took %.1f s (budget 300 s)",
                   run.trained - run.untrained, elapsed);
  return out;
}

Outcome check_semantic_ablation() {
  const auto start = std::chrono::steady_clock::now();
  double gap_sum = 0.0;
  std::string per_seed;
  for (std::uint64_t s = 0; s < 5; ++s) {
    SynthConfig cfg;
    cfg.n_classes = 10;
    cfg.per_class = 100;
    cfg.dim = 16;
    cfg.sep = 0.5;
    cfg.noise_std = 1.0;
    cfg.seed = 100 + s;
    cfg.n_sem = 150;
    cfg.distractors = 3;
    const SynthData data = synth_clusters(cfg);
    const SplitSpec spec = synth_split(10, 6, 10 + s);

    const double with_sem = train_and_eval(data, spec, "Sem-I-DML", 15, 10 + s).trained;
    const double without = train_and_eval(data, spec, "I-DML", 15, 10 + s).trained;
    gap_sum += with_sem - without;
    per_seed += fmt(" %+.3f", with_sem - without);
  }
  const double mean_gap = gap_sum / 5.0;
  Outcome out;
  out.passed = mean_gap >= 0.10;
  out.detail = fmt("mean accuracy gap %+.3f over 5 seeds (needs >= +0.100), gaps:", mean_gap) +
               per_seed + fmt(", took %.1f s", seconds_since(start));
  return out;
}

Outcome check_protocol_splits() {
  std::vector<std::string> faults;

  const std::map<std::string, std::size_t> cat66 = {
      {"Disapproval", 0}, {"Aversion", 0},      {"Annoyance", 0},  {"Anger", 0},
      {"Suffering", 1},   {"Sadness", 1},       {"Fatigue", 1},    {"Pain", 1},
      {"Fear", 2},        {"Disquitement", 2},  {"Peace", 3},      {"Affection", 3},
      {"Sympathy", 3},    {"Happiness", 4},     {"Pleasure", 4},   {"Excitement", 4},
      {"Anticipation", 4}, {"Surprising", 5},   {"Confuse/Doubt", 5}, {"Confidence", 5},
      {"Disconnection", 6}, {"Engagement", 7},  {"Sensitive", 8},  {"Embarrassment", 9},
      {"Esteem", 10},     {"Yearning", 11}};
  std::map<std::string, std::size_t> cat64 = cat66;
  cat64["Sensitive"] = 1;
  cat64["Embarrassment"] = 1;
  cat64["Disconnection"] = 6;
  cat64["Engagement"] = 7;
  cat64["Esteem"] = 8;
  cat64["Yearning"] = 9;

  const SplitSpec s66 = build_split("CAT-6:6", 0);
  if (s66.label2index != cat66) faults.push_back("CAT-6:6 label table");
  if (s66.label2index.size() != 26) faults.push_back("CAT-6:6 label count");
  if (s66.novel_classes != std::vector<std::size_t>{6, 7, 8, 9, 10, 11}) {
    faults.push_back("CAT-6:6 novel arity");
  }

  const SplitSpec s64 = build_split("CAT-6:4", 0);
  if (s64.label2index != cat64) faults.push_back("CAT-6:4 label table");
  if (s64.label2index.size() != 26) faults.push_back("CAT-6:4 label count");
  if (s64.novel_classes != std::vector<std::size_t>{6, 7, 8, 9}) {
    faults.push_back("CAT-6:4 novel arity");
  }
  if (s64.label2index.at("Sensitive") != s64.label2index.at("Sadness") ||
      s64.label2index.at("Embarrassment") != s64.label2index.at("Sadness")) {
    faults.push_back("CAT-6:4 folding of Sensitive/Embarrassment");
  }

  const SplitSpec l73 = build_split("LEV-7:3", 0);
  if (l73.seen_classes != std::vector<std::size_t>{1, 3, 5, 6, 8, 9, 10} ||
      l73.novel_classes != std::vector<std::size_t>{2, 4, 7}) {
    faults.push_back("LEV-7:3 level sets");
  }
  const SplitSpec l64 = build_split("LEV-6:4", 0);
  if (l64.seen_classes != std::vector<std::size_t>{1, 3, 5, 6, 8, 9} ||
      l64.novel_classes != std::vector<std::size_t>{2, 4, 7, 10}) {
    faults.push_back("LEV-6:4 level sets");
  }
  for (const SplitSpec* lev : {&l73, &l64}) {
    for (std::size_t level = 1; level <= 10; ++level) {
      if (lev->label2index.at(std::to_string(level)) != level) {
        faults.push_back(lev->name + " label encoding");
        break;
      }
    }
  }

  Outcome out;
  out.passed = faults.empty();
  if (faults.empty()) {
    out.detail = "all four split tables match their pinned definitions";
  } else {
    out.detail = "mismatches:";
    for (const auto& f : faults) out.detail += " " + f + ";";
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(ODML_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome check_cli_determinism() {
  const fs::path base = fs::temp_directory_path() / "odml_acceptance";
  fs::remove_all(base);
  fs::create_directories(base);
  const auto at = [&base](const std::string& rel) { return (base / rel).string(); };

  std::vector<std::string> faults;
  if (run_tool("synth --out " + at("data") +
               " --classes 6 --per-class 10 --dim 6 --sep 5 --noise 0.4 --seed 3"
               " --n-sem 12 --distractors 2") != 0) {
    faults.push_back("synth failed");
  }
  if (run_tool("split --records " + at("data/records.jsonl") + " --split synth-4:2 --seed 17" +
               " --out " + at("manifest.json")) != 0) {
    faults.push_back("split failed");
  }
  const std::string config = "{\n  \"records\": \"" + at("data/records.jsonl") +
                             "\",\n  \"manifest\": \"" + at("manifest.json") +
                             "\",\n  \"out_dir\": \"" + at("run1") +
                             "\",\n  \"model\": {\"variant\": \"Sem-IB-DML\", \"d_img\": 6, "
                             "\"d_body\": 6, \"n_sem\": 12, \"branch_width\": 5, "
                             "\"sem_hidden\": 4, \"d_emb\": 4},\n  \"train\": {\"epochs\": 2, "
                             "\"batch_size\": 8, \"classes_per_batch\": 2, "
                             "\"samples_per_class\": 4, \"seed\": 9, \"lr\": 0.01}\n}\n";
  {
    std::ofstream out(at("config.json"), std::ios::binary);
    out << config;
  }
  for (const char* run : {"run1", "run2"}) {
    if (run_tool("train --config " + at("config.json") + " --out-dir " + at(run)) != 0) {
      faults.push_back(std::string("train into ") + run + " failed");
    }
  }
  for (const auto& [run, eval] : std::vector<std::pair<std::string, std::string>>{
           {"run1", "eval1"}, {"run2", "eval2"}}) {
    if (run_tool("eval --checkpoint " + at(run + "/checkpoint.json") + " --manifest " +
                 at("manifest.json") + " --records " + at("data/records.jsonl") + " --out " +
                 at(eval)) != 0) {
      faults.push_back("eval into " + eval + " failed");
    }
  }
  if (faults.empty()) {
    if (read_file(at("run1/checkpoint.json")) != read_file(at("run2/checkpoint.json"))) {
      faults.push_back("checkpoints differ");
    }
    if (read_file(at("run1/history.csv")) != read_file(at("run2/history.csv"))) {
      faults.push_back("histories differ");
    }
    if (read_file(at("eval1/report.json")) != read_file(at("eval2/report.json"))) {
      faults.push_back("reports differ");
    }
    if (read_file(at("eval1/embeddings.csv")) != read_file(at("eval2/embeddings.csv"))) {
      faults.push_back("embeddings differ");
    }
  }

  Outcome out;
  out.passed = faults.empty();
  if (faults.empty()) {
    out.detail = "two train+eval runs produced byte-identical checkpoints and reports";
  } else {
    out.detail.clear();
    for (const auto& f : faults) out.detail += (out.detail.empty() ? "" : "; ") + f;
  }
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"miner-matches-exhaustive-oracle", check_miner_oracle},
      {"gradients-match-finite-differences", check_gradient_fidelity},
      {"nearest-neighbor-equals-bayes-posterior", check_bayes_equivalence},
      {"random-baseline-at-chance", check_random_baseline},
      {"synthetic-one-shot-end-to-end", check_oneshot_end_to_end},
      {"semantic-branch-ablation-gap", check_semantic_ablation},
      {"protocol-split-tables", check_protocol_splits},
      {"train-eval-determinism", check_cli_determinism},
  };

  bool all_passed = true;
  for (const auto& [name, run] : criteria) {
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome.passed = false;
      outcome.detail = std::string("threw: ") + e.what();
    }
    all_passed = all_passed && outcome.passed;
    std::printf("[%s] %s: %s\n", outcome.passed ? "PASS" : "FAIL", name.c_str(),
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%s\n", all_passed ? "acceptance: all criteria passed"
                                 : "acceptance: at least one criterion failed");
  return all_passed ? 0 : 1;
}
