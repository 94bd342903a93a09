#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odml/dataset.hpp"
#include "odml/layers.hpp"
#include "odml/matrix.hpp"
#include "odml/rng.hpp"

namespace odml {

struct Branches {
  bool img = false;
  bool body = false;
  bool sem = false;

  std::size_t count() const {
    return (img ? 1u : 0u) + (body ? 1u : 0u) + (sem ? 1u : 0u);
  }
};

// Which branches each named variant activates.
Branches variant_branches(const std::string& variant);

struct ModelConfig {
  std::string variant = "Sem-IB-DML";
  std::size_t d_img = 512;
  std::size_t d_body = 512;
  std::size_t n_sem = 150;
  std::size_t branch_width = 512;
  std::size_t sem_hidden = 256;
  std::size_t d_emb = 128;
  std::size_t n_base_classes = 6;

  Branches branches() const { return variant_branches(variant); }
  void validate() const;
};

// Per-branch feature matrices for one batch; only the matrices of active
// branches are consulted.
struct ModelInputs {
  Matrix img;   // B x d_img
  Matrix body;  // B x d_body
  Matrix sem;   // B x n_sem
};

// Stack the records' features (and their semantic presence vectors, when the
// sem branch is active) into batch matrices. `sem` may be null for variants
// without the sem branch.
ModelInputs build_inputs(std::span<const FeatureRecord> records, const ModelConfig& config,
                         SemSource* sem);

// Multi-branch embedder: linear img/body heads, a two-layer rectified sem
// head, concatenation in (img, body, sem) order, a linear fuse head, and L2
// row normalization; plus a linear classification head over the embedding.
class EmbedderModel {
 public:
  explicit EmbedderModel(ModelConfig config);

  void init(Rng& rng);

  const ModelConfig& config() const { return config_; }

  // B x d_emb, every row unit-norm. Pass a tape to record for backward.
  Matrix embed(const ModelInputs& inputs, Tape* tape) const;

  // B x n_base_classes seen-class logits for embeddings from embed().
  Matrix classify_logits(const Matrix& embedding, Tape* tape) const;

  // Backpropagates d_embedding (gradient w.r.t. the normalized embedding)
  // plus d_logits through a taped embed + classify_logits pass, accumulating
  // parameter gradients.
  void backward(const Matrix& d_embedding, const Matrix& d_logits, Tape& tape);

  std::vector<ParamRef> params();
  void zero_grad();

  // Layers are public for checkpointing and tests; absent optionals are
  // inactive branches.
  std::optional<Linear> img_head;
  std::optional<Linear> body_head;
  std::optional<Linear> sem_head1;
  std::optional<Linear> sem_head2;
  Linear fuse_head;
  Linear cls_head;

 private:
  ModelConfig config_;
  Branches active_;
};

void save_checkpoint(const std::string& path, EmbedderModel& model);
EmbedderModel load_checkpoint(const std::string& path);

}  // namespace odml
