#include "odml/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "odml/error.hpp"
#include "odml/gradcheck.hpp"
#include "odml/losses.hpp"
#include "odml/matrix.hpp"
#include "odml/model.hpp"
#include "odml/oneshot.hpp"
#include "odml/rng.hpp"

namespace odml {

bool VerifyReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.passed; });
}

namespace {

double plain_dot(std::span<const double> a, std::span<const double> b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += a[i] * b[i];
  return total;
}

}  // namespace

MinedPairs brute_force_mine(const EmbeddingBatch& batch, double epsilon, MinerRule rule) {
  batch.validate();
  const std::size_t n = batch.embeddings.rows();
  MinedPairs result;
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<std::size_t> pos_candidates;
    std::vector<std::size_t> neg_candidates;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      if (batch.labels[j] == batch.labels[a]) {
        pos_candidates.push_back(j);
      } else {
        neg_candidates.push_back(j);
      }
    }
    if (pos_candidates.empty() || neg_candidates.empty()) continue;

    double max_neg = -std::numeric_limits<double>::infinity();
    for (std::size_t k : neg_candidates) {
      max_neg = std::max(max_neg, plain_dot(batch.embeddings.row(a), batch.embeddings.row(k)));
    }
    double min_pos = std::numeric_limits<double>::infinity();
    for (std::size_t k : pos_candidates) {
      min_pos = std::min(min_pos, plain_dot(batch.embeddings.row(a), batch.embeddings.row(k)));
    }

    for (std::size_t p : pos_candidates) {
      const double s = plain_dot(batch.embeddings.row(a), batch.embeddings.row(p));
      const bool keep =
          rule == MinerRule::prose ? (s < max_neg + epsilon) : (s > max_neg + epsilon);
      if (keep) result.positives.emplace_back(a, p);
    }
    for (std::size_t q : neg_candidates) {
      const double s = plain_dot(batch.embeddings.row(a), batch.embeddings.row(q));
      const bool keep =
          rule == MinerRule::prose ? (s > min_pos - epsilon) : (s < min_pos - epsilon);
      if (keep) result.negatives.emplace_back(a, q);
    }
  }
  return result;
}

namespace {

std::vector<Triplet> brute_force_triplets(const MinedPairs& pairs) {
  std::vector<Triplet> out;
  for (const auto& [a, p] : pairs.positives) {
    for (const auto& [a2, q] : pairs.negatives) {
      if (a2 == a) out.push_back({a, p, q});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Matrix random_unit_rows(std::size_t n, std::size_t d, Rng& rng) {
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    do {
      sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        m(i, j) = rng.gaussian();
        sq += m(i, j) * m(i, j);
      }
    } while (std::sqrt(sq) < 1e-9);
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t j = 0; j < d; ++j) m(i, j) *= inv;
  }
  return m;
}

std::string describe_pairs(const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  std::ostringstream out;
  out << "{";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0) out << " ";
    out << "(" << pairs[i].first << "," << pairs[i].second << ")";
  }
  out << "}";
  return out.str();
}

CheckResult check_miner(const VerifyOptions& options, Rng rng) {
  CheckResult result;
  result.name = "miner-oracle-equivalence";
  const double eps_choices[] = {0.0, 0.05, 0.1, 0.3};
  std::size_t pairs_compared = 0;
  for (std::size_t b = 0; b < options.miner_batches; ++b) {
    const std::size_t n = 2 + rng.below(15);
    const std::size_t n_classes = 1 + rng.below(4);
    const std::size_t d = 1 + rng.below(8);
    const double epsilon = eps_choices[rng.below(4)];

    EmbeddingBatch batch;
    batch.embeddings = random_unit_rows(n, d, rng);
    batch.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) batch.labels[i] = rng.below(n_classes);

    MinedPairs mined = ms_mine(batch, epsilon, options.rule);
    MinedPairs oracle = brute_force_mine(batch, epsilon, options.rule);
    std::sort(mined.positives.begin(), mined.positives.end());
    std::sort(mined.negatives.begin(), mined.negatives.end());
    std::sort(oracle.positives.begin(), oracle.positives.end());
    std::sort(oracle.negatives.begin(), oracle.negatives.end());

    std::vector<Triplet> mined_triplets = assemble_triplets(mined);
    std::sort(mined_triplets.begin(), mined_triplets.end());
    const std::vector<Triplet> oracle_triplets = brute_force_triplets(oracle);

    if (mined.positives != oracle.positives || mined.negatives != oracle.negatives ||
        mined_triplets != oracle_triplets) {
      std::ostringstream out;
      out << "batch " << b << " (size " << n << ", " << n_classes << " classes, dim " << d
          << ", epsilon " << epsilon << "): miner positives " << describe_pairs(mined.positives)
          << " vs oracle " << describe_pairs(oracle.positives) << "; miner negatives "
          << describe_pairs(mined.negatives) << " vs oracle " << describe_pairs(oracle.negatives)
          << "; " << mined_triplets.size() << " vs " << oracle_triplets.size() << " triplets";
      result.detail = out.str();
      return result;
    }
    pairs_compared += oracle.positives.size() + oracle.negatives.size();
  }
  result.passed = true;
  result.detail = std::to_string(options.miner_batches) + " batches, " +
                  std::to_string(pairs_compared) + " kept pairs matched";
  return result;
}

ModelInputs random_model_inputs(const ModelConfig& config, std::size_t batch, Rng& rng) {
  ModelInputs in;
  const Branches active = config.branches();
  if (active.img) {
    in.img = Matrix(batch, config.d_img);
    for (double& v : in.img.data()) v = rng.gaussian();
  }
  if (active.body) {
    in.body = Matrix(batch, config.d_body);
    for (double& v : in.body.data()) v = rng.gaussian();
  }
  if (active.sem) {
    in.sem = Matrix(batch, config.n_sem);
    for (double& v : in.sem.data()) v = rng.below(2) ? 1.0 : 0.0;
  }
  return in;
}

CheckResult check_gradients(const VerifyOptions& options, Rng rng) {
  CheckResult result;
  result.name = "gradient-fidelity";
  const char* variants[] = {"I-DML", "B-DML", "IB-DML", "Sem-I-DML", "Sem-IB-DML"};
  const std::size_t instances = options.corrupt_gradient ? 1 : options.grad_instances;
  double max_rel_error = 0.0;
  std::string worst;

  for (std::size_t inst = 0; inst < instances; ++inst) {
    ModelConfig cfg;
    cfg.variant = variants[inst % 5];
    cfg.d_img = 3 + rng.below(4);
    cfg.d_body = 3 + rng.below(4);
    cfg.n_sem = 5 + rng.below(5);
    cfg.branch_width = 3 + rng.below(4);
    cfg.sem_hidden = 3 + rng.below(3);
    cfg.d_emb = 3 + rng.below(4);
    cfg.n_base_classes = 2 + rng.below(3);

    EmbedderModel model(cfg);
    Rng init = Rng(rng.next_u64()).substream("init");
    model.init(init);

    const std::size_t batch = 6 + rng.below(4);
    std::vector<std::size_t> labels(batch);
    for (std::size_t i = 0; i < batch; ++i) labels[i] = i % cfg.n_base_classes;

    ModelInputs in;
    std::vector<Triplet> triplets;
    for (int attempt = 0; attempt < 20 && triplets.empty(); ++attempt) {
      in = random_model_inputs(cfg, batch, rng);
      EmbeddingBatch initial{model.embed(in, nullptr), labels};
      triplets = assemble_triplets(ms_mine(initial, 0.1));
    }
    if (triplets.empty()) {
      result.detail = "instance " + std::to_string(inst) + ": no triplets after 20 attempts";
      return result;
    }

    LossConfig loss_cfg;
    auto loss = [&]() {
      Matrix z = model.embed(in, nullptr);
      Matrix logits = model.classify_logits(z, nullptr);
      const double t = triplet_loss(z, triplets, loss_cfg.margin).value;
      const double c = cross_entropy(logits, labels).value;
      return combined_loss(t, c, loss_cfg);
    };
    auto params = model.params();
    auto compute_grads = [&]() {
      model.zero_grad();
      Tape tape;
      Matrix z = model.embed(in, &tape);
      Matrix logits = model.classify_logits(z, &tape);
      auto t = triplet_loss(z, triplets, loss_cfg.margin);
      auto c = cross_entropy(logits, labels);
      Matrix d_z = t.embedding_grad;
      for (double& g : d_z.data()) g *= loss_cfg.alpha;
      Matrix d_logits = c.logit_grad;
      for (double& g : d_logits.data()) g *= loss_cfg.beta;
      model.backward(d_z, d_logits, tape);
      if (options.corrupt_gradient) {
        double* target = nullptr;
        double best = -1.0;
        for (const ParamRef& p : params) {
          for (double& g : p.grad->data()) {
            if (std::fabs(g) > best) {
              best = std::fabs(g);
              target = &g;
            }
          }
        }
        if (target != nullptr) *target *= 1.01;
      }
    };

    std::size_t probes = 40;
    if (options.corrupt_gradient) {
      probes = 0;
      for (const ParamRef& p : params) probes += p.value->size();
    }
    Rng probe_rng(rng.next_u64());
    const GradCheckResult check = grad_check(params, loss, compute_grads, probes, probe_rng);
    if (check.max_rel_error > max_rel_error) {
      max_rel_error = check.max_rel_error;
      worst = "instance " + std::to_string(inst) + " (" + cfg.variant + "): " + check.worst;
    }
  }

  std::ostringstream summary;
  summary << instances << " instances, max relative error " << max_rel_error;
  if (max_rel_error > 1e-4) {
    result.detail = summary.str() + "; worst " + worst;
    return result;
  }
  result.passed = true;
  result.detail = summary.str();
  return result;
}

CheckResult check_bayes(Rng rng) {
  CheckResult result;
  result.name = "nearest-neighbor-bayes-equivalence";
  for (std::size_t trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.below(5);
    const std::size_t d = 2 + rng.below(6);
    std::vector<std::size_t> classes(k);
    std::size_t next = rng.below(3);
    for (std::size_t i = 0; i < k; ++i) {
      classes[i] = next;
      next += 1 + rng.below(3);
    }
    const SupportIndex index = build_support_index(classes, random_unit_rows(k, d, rng));

    const Matrix q = random_unit_rows(1, d, rng);
    std::vector<double> query(q.row(0).begin(), q.row(0).end());

    std::size_t best = 0;
    double best_posterior = -1.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double dist = euclidean_distance(query, index.embeddings.row(i));
      const double posterior = std::exp(-dist * dist);
      if (posterior > best_posterior) {
        best_posterior = posterior;
        best = i;
      }
    }
    const std::size_t predicted = predict(query, index);
    if (predicted != index.classes[best]) {
      result.detail = "trial " + std::to_string(trial) + ": nearest neighbor chose class " +
                      std::to_string(predicted) + ", posterior argmax chose class " +
                      std::to_string(index.classes[best]);
      return result;
    }
  }
  result.passed = true;
  result.detail = "100/100 agreements";
  return result;
}

CheckResult check_loss_invariants(Rng rng) {
  CheckResult result;
  result.name = "loss-invariants";

  for (std::size_t round = 0; round < 50; ++round) {
    const std::size_t batch = 1 + rng.below(6);
    const std::size_t k = 2 + rng.below(5);
    Matrix logits(batch, k);
    for (double& v : logits.data()) v = rng.gaussian() * 3.0;
    std::vector<std::size_t> targets(batch);
    for (std::size_t i = 0; i < batch; ++i) targets[i] = rng.below(k);

    const CrossEntropyResult ce = cross_entropy(logits, targets);
    if (!(ce.value >= 0.0)) {
      result.detail = "round " + std::to_string(round) + ": negative cross entropy " +
                      std::to_string(ce.value);
      return result;
    }
    for (std::size_t i = 0; i < batch; ++i) {
      double row_sum = 0.0;
      for (double g : ce.logit_grad.row(i)) row_sum += g;
      if (std::fabs(row_sum) > 1e-10) {
        result.detail = "round " + std::to_string(round) + ": cross-entropy gradient row " +
                        std::to_string(i) + " sums to " + std::to_string(row_sum);
        return result;
      }
    }

    Matrix flat(batch, k, 0.25);
    const CrossEntropyResult uniform = cross_entropy(flat, targets);
    if (std::fabs(uniform.value - std::log(static_cast<double>(k))) > 1e-12) {
      result.detail = "round " + std::to_string(round) + ": uniform logits gave " +
                      std::to_string(uniform.value) + " instead of ln " + std::to_string(k);
      return result;
    }
  }

  for (std::size_t round = 0; round < 50; ++round) {
    const std::size_t n = 4 + rng.below(5);
    Matrix emb = random_unit_rows(n, 3, rng);
    std::vector<Triplet> triplets;
    const std::size_t count = 1 + rng.below(6);
    for (std::size_t t = 0; t < count; ++t) {
      const std::size_t a = rng.below(n);
      std::size_t p = rng.below(n - 1);
      if (p >= a) ++p;
      std::size_t q = rng.below(n - 1);
      if (q >= a) ++q;
      triplets.push_back({a, p, q});
    }
    const double margin = rng.uniform(0.0, 0.5);
    const TripletLossResult mean_r = triplet_loss(emb, triplets, margin, TripletReduction::mean);
    const TripletLossResult sum_r = triplet_loss(emb, triplets, margin, TripletReduction::sum);
    if (!(mean_r.value >= 0.0) || !(sum_r.value >= 0.0)) {
      result.detail = "round " + std::to_string(round) + ": negative triplet loss";
      return result;
    }
    const double scaled = mean_r.value * static_cast<double>(triplets.size());
    if (std::fabs(scaled - sum_r.value) > 1e-9 * std::max(1.0, sum_r.value)) {
      result.detail = "round " + std::to_string(round) + ": mean*" +
                      std::to_string(triplets.size()) + " = " + std::to_string(scaled) +
                      " but sum = " + std::to_string(sum_r.value);
      return result;
    }

    const TripletLossResult empty = triplet_loss(emb, {}, margin);
    if (empty.value != 0.0) {
      result.detail = "empty triplet list scored " + std::to_string(empty.value);
      return result;
    }

    LossConfig cfg;
    cfg.alpha = rng.uniform(0.0, 1.0);
    cfg.beta = rng.uniform(0.0, 1.0);
    const double t_val = rng.uniform(0.0, 3.0);
    const double c_val = rng.uniform(0.0, 3.0);
    const double combined = combined_loss(t_val, c_val, cfg);
    if (std::fabs(combined - (cfg.alpha * t_val + cfg.beta * c_val)) > 1e-15) {
      result.detail = "combined loss deviates from its weighted sum";
      return result;
    }
  }

  result.passed = true;
  result.detail = "cross-entropy, triplet, and combination identities held over 100 rounds";
  return result;
}

}  // namespace

VerifyReport run_verification(const VerifyOptions& options) {
  const Rng base = Rng(options.seed).substream("verify");
  VerifyReport report;
  report.checks.push_back(check_miner(options, base.substream("miner")));
  report.checks.push_back(check_gradients(options, base.substream("gradients")));
  report.checks.push_back(check_bayes(base.substream("bayes")));
  report.checks.push_back(check_loss_invariants(base.substream("losses")));
  return report;
}

}  // namespace odml
