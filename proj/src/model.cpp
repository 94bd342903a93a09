#include "odml/model.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "odml/error.hpp"

namespace odml {

using nlohmann::json;
using nlohmann::ordered_json;

Branches variant_branches(const std::string& variant) {
  if (variant == "I-DML") return {true, false, false};
  if (variant == "B-DML") return {false, true, false};
  if (variant == "IB-DML") return {true, true, false};
  if (variant == "Sem-I-DML") return {true, false, true};
  if (variant == "Sem-IB-DML") return {true, true, true};
  throw ValidationError("unknown variant '" + variant +
                        "' (expected I-DML, B-DML, IB-DML, Sem-I-DML, or Sem-IB-DML)");
}

void ModelConfig::validate() const {
  const Branches b = variant_branches(variant);  // throws on unknown names
  if (b.count() == 0) throw ValidationError("model: no active branches");
  if (b.img && d_img == 0) throw ValidationError("model: d_img must be positive");
  if (b.body && d_body == 0) throw ValidationError("model: d_body must be positive");
  if (b.sem && n_sem == 0) throw ValidationError("model: n_sem must be positive");
  if (b.sem && sem_hidden == 0) throw ValidationError("model: sem_hidden must be positive");
  if (branch_width == 0) throw ValidationError("model: branch_width must be positive");
  if (d_emb == 0) throw ValidationError("model: d_emb must be positive");
  if (n_base_classes < 2) throw ValidationError("model: need at least 2 base classes");
}

ModelInputs build_inputs(std::span<const FeatureRecord> records, const ModelConfig& config,
                         SemSource* sem) {
  config.validate();
  const Branches active = config.branches();
  if (records.empty()) throw ValidationError("build_inputs: empty record batch");

  ModelInputs in;
  if (active.img) in.img = Matrix(records.size(), config.d_img);
  if (active.body) in.body = Matrix(records.size(), config.d_body);
  if (active.sem) {
    if (sem == nullptr) {
      throw ValidationError("build_inputs: variant '" + config.variant +
                            "' needs a semantic source");
    }
    if (sem->n_sem() != config.n_sem) {
      throw DimensionError("build_inputs: semantic source has " +
                           std::to_string(sem->n_sem()) + " classes, model expects " +
                           std::to_string(config.n_sem));
    }
    in.sem = Matrix(records.size(), config.n_sem);
  }

  for (std::size_t r = 0; r < records.size(); ++r) {
    const FeatureRecord& rec = records[r];
    if (active.img) {
      if (rec.img_feat.size() != config.d_img) {
        throw DimensionError("record '" + rec.id + "': img_feat has " +
                             std::to_string(rec.img_feat.size()) + " dims, model expects " +
                             std::to_string(config.d_img));
      }
      for (std::size_t c = 0; c < config.d_img; ++c) in.img(r, c) = rec.img_feat[c];
    }
    if (active.body) {
      if (rec.body_feat.size() != config.d_body) {
        throw DimensionError("record '" + rec.id + "': body_feat has " +
                             std::to_string(rec.body_feat.size()) + " dims, model expects " +
                             std::to_string(config.d_body));
      }
      for (std::size_t c = 0; c < config.d_body; ++c) in.body(r, c) = rec.body_feat[c];
    }
    if (active.sem) {
      const std::vector<double>& v = sem->sem_vector(rec);
      for (std::size_t c = 0; c < config.n_sem; ++c) in.sem(r, c) = v[c];
    }
  }
  return in;
}

EmbedderModel::EmbedderModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  active_ = config_.branches();
  if (active_.img) img_head.emplace(config_.d_img, config_.branch_width);
  if (active_.body) body_head.emplace(config_.d_body, config_.branch_width);
  if (active_.sem) {
    sem_head1.emplace(config_.n_sem, config_.sem_hidden);
    sem_head2.emplace(config_.sem_hidden, config_.branch_width);
  }
  fuse_head = Linear(config_.branch_width * active_.count(), config_.d_emb);
  cls_head = Linear(config_.d_emb, config_.n_base_classes);
}

void EmbedderModel::init(Rng& rng) {
  if (img_head) img_head->init(rng);
  if (body_head) body_head->init(rng);
  if (sem_head1) sem_head1->init(rng);
  if (sem_head2) sem_head2->init(rng);
  fuse_head.init(rng);
  cls_head.init(rng);
}

Matrix EmbedderModel::embed(const ModelInputs& inputs, Tape* tape) const {
  std::vector<Matrix> parts;
  std::size_t batch = 0;
  auto check_batch = [&batch](const Matrix& m, const char* name) {
    if (batch == 0) {
      batch = m.rows();
    } else if (m.rows() != batch) {
      throw DimensionError(std::string("embed: ") + name + " batch size " +
                           std::to_string(m.rows()) + " disagrees with " +
                           std::to_string(batch));
    }
  };
  if (active_.img) {
    require_finite(inputs.img, "embed: img input");
    check_batch(inputs.img, "img");
    parts.push_back(img_head->forward(inputs.img, tape));
  }
  if (active_.body) {
    require_finite(inputs.body, "embed: body input");
    check_batch(inputs.body, "body");
    parts.push_back(body_head->forward(inputs.body, tape));
  }
  if (active_.sem) {
    require_finite(inputs.sem, "embed: sem input");
    check_batch(inputs.sem, "sem");
    Matrix h = sem_head1->forward(inputs.sem, tape);
    h = relu_forward(h, tape);
    parts.push_back(sem_head2->forward(h, tape));
  }
  if (batch == 0) throw ValidationError("embed: empty batch");

  Matrix fused = fuse_head.forward(hconcat(parts), tape);
  return l2_normalize_forward(fused, tape);
}

Matrix EmbedderModel::classify_logits(const Matrix& embedding, Tape* tape) const {
  return cls_head.forward(embedding, tape);
}

void EmbedderModel::backward(const Matrix& d_embedding, const Matrix& d_logits, Tape& tape) {
  Matrix d_emb_total = cls_head.backward(d_logits, tape);
  if (!d_emb_total.same_shape(d_embedding)) {
    throw DimensionError("backward: embedding gradient shape mismatch");
  }
  axpy(d_emb_total, d_embedding, 1.0);

  Matrix d_fused = l2_normalize_backward(d_emb_total, tape);
  Matrix d_concat = fuse_head.backward(d_fused, tape);

  // Branches peel off the tape in reverse forward order: sem, body, img.
  std::size_t offset = config_.branch_width * active_.count();
  if (active_.sem) {
    offset -= config_.branch_width;
    Matrix d_sem_out = slice_cols(d_concat, offset, config_.branch_width);
    Matrix d_hidden = sem_head2->backward(d_sem_out, tape);
    d_hidden = relu_backward(d_hidden, tape);
    (void)sem_head1->backward(d_hidden, tape);
  }
  if (active_.body) {
    offset -= config_.branch_width;
    (void)body_head->backward(slice_cols(d_concat, offset, config_.branch_width), tape);
  }
  if (active_.img) {
    offset -= config_.branch_width;
    (void)img_head->backward(slice_cols(d_concat, offset, config_.branch_width), tape);
  }
}

std::vector<ParamRef> EmbedderModel::params() {
  std::vector<ParamRef> out;
  auto append = [&out](std::vector<ParamRef> refs) {
    for (auto& r : refs) out.push_back(std::move(r));
  };
  if (img_head) append(img_head->params("img_head"));
  if (body_head) append(body_head->params("body_head"));
  if (sem_head1) append(sem_head1->params("sem_head1"));
  if (sem_head2) append(sem_head2->params("sem_head2"));
  append(fuse_head.params("fuse_head"));
  append(cls_head.params("cls_head"));
  return out;
}

void EmbedderModel::zero_grad() {
  if (img_head) img_head->zero_grad();
  if (body_head) body_head->zero_grad();
  if (sem_head1) sem_head1->zero_grad();
  if (sem_head2) sem_head2->zero_grad();
  fuse_head.zero_grad();
  cls_head.zero_grad();
}

namespace {

json config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["variant"] = c.variant;
  j["d_img"] = c.d_img;
  j["d_body"] = c.d_body;
  j["n_sem"] = c.n_sem;
  j["branch_width"] = c.branch_width;
  j["sem_hidden"] = c.sem_hidden;
  j["d_emb"] = c.d_emb;
  j["n_base_classes"] = c.n_base_classes;
  return j;
}

ModelConfig config_from_json(const json& j, const std::string& origin) {
  static const std::set<std::string> known = {"variant",    "d_img",      "d_body",
                                             "n_sem",      "branch_width", "sem_hidden",
                                             "d_emb",      "n_base_classes"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) throw ParseError(origin + ": unknown model config field '" + key + "'");
  }
  ModelConfig c;
  try {
    c.variant = j.at("variant").get<std::string>();
    c.d_img = j.at("d_img").get<std::size_t>();
    c.d_body = j.at("d_body").get<std::size_t>();
    c.n_sem = j.at("n_sem").get<std::size_t>();
    c.branch_width = j.at("branch_width").get<std::size_t>();
    c.sem_hidden = j.at("sem_hidden").get<std::size_t>();
    c.d_emb = j.at("d_emb").get<std::size_t>();
    c.n_base_classes = j.at("n_base_classes").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(origin + ": bad model config: " + e.what());
  }
  return c;
}

json matrix_to_json(const Matrix& m) {
  ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = m.data();
  return j;
}

Matrix matrix_from_json(const json& j, const std::string& name, const std::string& origin) {
  try {
    const std::size_t rows = j.at("rows").get<std::size_t>();
    const std::size_t cols = j.at("cols").get<std::size_t>();
    std::vector<double> data = j.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) {
      throw ParseError(origin + ": parameter '" + name + "' has " + std::to_string(data.size()) +
                       " values for shape " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    Matrix m(rows, cols, std::move(data));
    require_finite(m, origin + ": parameter '" + name + "'");
    return m;
  } catch (const json::exception& e) {
    throw ParseError(origin + ": parameter '" + name + "': " + e.what());
  }
}

constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, EmbedderModel& model) {
  ordered_json j;
  j["version"] = kCheckpointVersion;
  j["config"] = config_to_json(model.config());
  ordered_json params = ordered_json::object();
  for (const ParamRef& ref : model.params()) {
    params[ref.name] = matrix_to_json(*ref.value);
  }
  j["parameters"] = params;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write checkpoint '" + path + "'");
  out << j.dump() << '\n';
  if (!out.flush()) throw ParseError("failed writing checkpoint '" + path + "'");
}

EmbedderModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();

  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("version")) {
    throw ParseError(path + ": not a checkpoint document");
  }
  if (!j["version"].is_number_integer() || j["version"].get<int>() != kCheckpointVersion) {
    throw ParseError(path + ": unsupported checkpoint version " + j["version"].dump() +
                     " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
  }
  if (!j.contains("config") || !j.contains("parameters")) {
    throw ParseError(path + ": checkpoint needs 'config' and 'parameters'");
  }

  EmbedderModel model(config_from_json(j["config"], path));
  const json& params = j["parameters"];
  std::set<std::string> seen;
  for (const ParamRef& ref : model.params()) {
    if (!params.contains(ref.name)) {
      throw ParseError(path + ": missing parameter '" + ref.name + "'");
    }
    Matrix loaded = matrix_from_json(params[ref.name], ref.name, path);
    if (!loaded.same_shape(*ref.value)) {
      throw ParseError(path + ": parameter '" + ref.name + "' has shape " +
                       std::to_string(loaded.rows()) + "x" + std::to_string(loaded.cols()) +
                       ", config implies " + std::to_string(ref.value->rows()) + "x" +
                       std::to_string(ref.value->cols()));
    }
    *ref.value = std::move(loaded);
    seen.insert(ref.name);
  }
  for (const auto& [name, value] : params.items()) {
    (void)value;
    if (!seen.count(name)) {
      throw ParseError(path + ": unexpected parameter '" + name + "'");
    }
  }
  return model;
}

}  // namespace odml
