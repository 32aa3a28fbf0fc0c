#include "fakeidet/head.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "fakeidet/hashing.hpp"
#include "fakeidet/kernels.hpp"
#include "fakeidet/rng.hpp"

namespace fakeidet {

namespace {

constexpr const char* kModule = "head-trainer";
constexpr const char* kFormat = "FIDHEAD1";

void l2_normalize_rows(EmbeddingFile& f) {
  for (std::size_t i = 0; i < f.count(); ++i) {
    auto* row = f.values.data() + i * f.dim;
    double sq = 0.0;
    for (std::size_t k = 0; k < f.dim; ++k) sq += static_cast<double>(row[k]) * row[k];
    if (sq <= 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t k = 0; k < f.dim; ++k) row[k] = static_cast<float>(row[k] * inv);
  }
}

double mean_loss(const kernels::FeatureView& x, std::span<const std::uint8_t> labels, std::span<const double> w,
                 double b) {
  std::vector<double> z(x.rows());
  kernels::parallel::logits(x, w, b, z);
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += bce_loss(z[i], labels[i]);
  return sum / static_cast<double>(z.size());
}

nlohmann::ordered_json config_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["l2_normalize"] = c.l2_normalize;
  return j;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::config, kModule, "learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw Error(ErrorKind::config, kModule, "beta1 must lie in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw Error(ErrorKind::config, kModule, "beta2 must lie in [0,1)");
  if (!(epsilon > 0.0)) throw Error(ErrorKind::config, kModule, "epsilon must be positive");
  if (max_epochs < 1) throw Error(ErrorKind::config, kModule, "max_epochs must be at least 1");
  if (patience < 1) throw Error(ErrorKind::config, kModule, "patience must be at least 1");
}

TrainingAborted::TrainingAborted(const std::string& message, nlohmann::json diagnostics)
    : Error(ErrorKind::training, kModule, message), diagnostics_(std::move(diagnostics)) {}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw Error(ErrorKind::config, kModule, "Adam parameter, gradient and state sizes differ");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i]))
      throw TrainingAborted("non-finite gradient at parameter " + std::to_string(i),
                            {{"step", state.t + 1}, {"parameter", i}, {"gradient", std::to_string(grads[i])}});
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correct1 = 1.0 - std::pow(cfg.beta1, t);
  const double correct2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / correct1;
    const double v_hat = state.v[i] / correct2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

LabeledEmbeddings join_labels(EmbeddingFile features, std::span<const PatchRecord> manifest) {
  std::unordered_map<std::string_view, Label> by_id;
  for (const auto& r : manifest) by_id.emplace(r.patch_id, r.label);
  LabeledEmbeddings out;
  out.labels.reserve(features.count());
  for (const auto& id : features.patch_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end())
      throw Error(ErrorKind::integrity, kModule, "patch " + id + " has an embedding but no manifest record");
    out.labels.push_back(it->second == Label::attack ? 1 : 0);
  }
  out.features = std::move(features);
  return out;
}

double HeadModel::logit(std::span<const float> e) const {
  if (e.size() != dim)
    throw Error(ErrorKind::config, kModule,
                "embedding dimension " + std::to_string(e.size()) + " does not match model dimension " +
                    std::to_string(dim));
  double scale = 1.0;
  if (l2_normalize) {
    double sq = 0.0;
    for (float v : e) sq += static_cast<double>(v) * v;
    if (sq > 0.0) scale = 1.0 / std::sqrt(sq);
  }
  double z = bias;
  for (std::size_t k = 0; k < dim; ++k) {
    // Match the float rounding applied to normalized training features.
    const double x = l2_normalize ? static_cast<double>(static_cast<float>(e[k] * scale)) : e[k];
    z += weights[k] * x;
  }
  return z;
}

HeadModel train_head(const LabeledEmbeddings& train, const LabeledEmbeddings& val, const TrainConfig& cfg,
                     const ValidationHook& hook) {
  cfg.validate();
  const std::size_t dim = train.features.dim;
  if (val.features.dim != dim)
    throw Error(ErrorKind::config, kModule,
                "train dimension " + std::to_string(dim) + " differs from validation dimension " +
                    std::to_string(val.features.dim));
  if (train.labels.size() != train.features.count() || val.labels.size() != val.features.count())
    throw Error(ErrorKind::config, kModule, "label count does not match embedding count");
  if (val.features.count() == 0) throw Error(ErrorKind::degenerate_data, kModule, "validation split is empty");
  const auto attacks = std::count(train.labels.begin(), train.labels.end(), std::uint8_t{1});
  if (attacks == 0 || static_cast<std::size_t>(attacks) == train.labels.size())
    throw Error(ErrorKind::degenerate_data, kModule,
                attacks == 0 ? "training labels contain no attack samples"
                             : "training labels contain no bona fide samples");
  if (!train.features.backbone_id.empty() && !val.features.backbone_id.empty() &&
      train.features.backbone_id != val.features.backbone_id)
    throw Error(ErrorKind::config, kModule,
                "train backbone " + train.features.backbone_id + " differs from validation backbone " +
                    val.features.backbone_id);

  EmbeddingFile train_x = train.features;
  EmbeddingFile val_x = val.features;
  if (cfg.l2_normalize) {
    l2_normalize_rows(train_x);
    l2_normalize_rows(val_x);
  }
  const auto xv = train_x.view();
  const auto vv = val_x.view();
  const std::size_t n = train_x.count();
  const std::size_t batch = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);

  // params = [w_0 .. w_{d-1}, b]; zero start.
  std::vector<double> params(dim + 1, 0.0);
  std::vector<double> best = params;
  std::vector<double> grads(dim + 1);
  AdamState adam(dim + 1);
  auto weights = [&](const std::vector<double>& p) { return std::span<const double>(p.data(), dim); };

  HeadModel model;
  model.backbone_id = train.features.backbone_id;
  model.dim = dim;
  model.l2_normalize = cfg.l2_normalize;
  model.meta.config = cfg;
  model.meta.initial_train_loss = mean_loss(xv, train.labels, weights(params), params[dim]);

  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<std::size_t> order(n);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(keyed_hash64(cfg.seed, {"train.epoch", std::to_string(epoch)}));
    rng.shuffle(std::span<std::size_t>(order));

    for (std::size_t start = 0; start < n; start += batch) {
      const auto rows = std::span<const std::size_t>(order).subspan(start, std::min(batch, n - start));
      const auto lg = kernels::parallel::bce_loss_grad(xv, train.labels, rows, weights(params), params[dim]);
      const double inv = 1.0 / static_cast<double>(rows.size());
      for (std::size_t k = 0; k < dim; ++k) grads[k] = lg.grad_w[k] * inv;
      grads[dim] = lg.grad_b * inv;
      try {
        adam_step(params, grads, adam, cfg);
      } catch (const TrainingAborted& e) {
        auto diag = e.diagnostics();
        diag["epoch"] = epoch;
        diag["batch_start"] = start;
        throw TrainingAborted(e.detail() + " (epoch " + std::to_string(epoch) + ")", diag);
      }
    }

    double vl = mean_loss(vv, val.labels, weights(params), params[dim]);
    if (hook) vl = hook(epoch, vl);
    model.meta.val_history.push_back(vl);
    model.meta.epochs_run = epoch;
    if (vl < best_loss) {
      best_loss = vl;
      best = params;
      model.meta.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      model.meta.early_stopped = true;
      break;
    }
  }

  model.weights.assign(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(dim));
  model.bias = best[dim];
  model.meta.best_val_loss = best_loss;
  model.meta.final_train_loss = mean_loss(xv, train.labels, weights(best), best[dim]);
  return model;
}

double mean_bce(const HeadModel& model, const LabeledEmbeddings& data) {
  double sum = 0.0;
  for (std::size_t i = 0; i < data.features.count(); ++i)
    sum += bce_loss(model.logit(data.features.row(i)), data.labels[i]);
  return sum / static_cast<double>(data.features.count());
}

double predict(const HeadModel& model, std::span<const float> embedding) {
  return sigmoid(model.logit(embedding));
}

std::vector<double> predict_all(const HeadModel& model, const EmbeddingFile& file) {
  if (file.dim != model.dim)
    throw Error(ErrorKind::config, kModule,
                "embedding dimension " + std::to_string(file.dim) + " does not match model dimension " +
                    std::to_string(model.dim));
  std::vector<double> out(file.count());
  if (model.l2_normalize) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = predict(model, file.row(i));
    return out;
  }
  kernels::parallel::logits(file.view(), model.weights, model.bias, out);
  for (auto& z : out) z = sigmoid(z);
  return out;
}

nlohmann::ordered_json to_json(const HeadModel& model) {
  nlohmann::ordered_json j;
  j["format"] = kFormat;
  j["backbone"] = model.backbone_id;
  j["dim"] = model.dim;
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  j["l2_normalize"] = model.l2_normalize;
  auto& m = j["train_meta"];
  m["epochs_run"] = model.meta.epochs_run;
  m["best_epoch"] = model.meta.best_epoch;
  m["best_val_loss"] = model.meta.best_val_loss;
  m["initial_train_loss"] = model.meta.initial_train_loss;
  m["final_train_loss"] = model.meta.final_train_loss;
  m["early_stopped"] = model.meta.early_stopped;
  m["val_history"] = model.meta.val_history;
  m["seed"] = model.meta.config.seed;
  m["hyperparameters"] = config_json(model.meta.config);
  return j;
}

HeadModel head_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormat)
      throw Error(ErrorKind::format, kModule, "not a FIDHEAD1 model");
    HeadModel m;
    m.backbone_id = j.at("backbone").get<std::string>();
    m.dim = j.at("dim").get<std::size_t>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.l2_normalize = j.value("l2_normalize", false);
    if (m.weights.size() != m.dim)
      throw Error(ErrorKind::format, kModule, "weight vector length differs from dim");
    for (double w : m.weights)
      if (!std::isfinite(w)) throw Error(ErrorKind::format, kModule, "non-finite weight");
    if (!std::isfinite(m.bias)) throw Error(ErrorKind::format, kModule, "non-finite bias");
    if (j.contains("train_meta")) {
      const auto& t = j.at("train_meta");
      m.meta.epochs_run = t.value("epochs_run", 0);
      m.meta.best_epoch = t.value("best_epoch", 0);
      m.meta.best_val_loss = t.value("best_val_loss", 0.0);
      m.meta.initial_train_loss = t.value("initial_train_loss", 0.0);
      m.meta.final_train_loss = t.value("final_train_loss", 0.0);
      m.meta.early_stopped = t.value("early_stopped", false);
      m.meta.val_history = t.value("val_history", std::vector<double>{});
      if (t.contains("hyperparameters")) {
        const auto& h = t.at("hyperparameters");
        auto& c = m.meta.config;
        c.learning_rate = h.value("learning_rate", c.learning_rate);
        c.beta1 = h.value("beta1", c.beta1);
        c.beta2 = h.value("beta2", c.beta2);
        c.epsilon = h.value("epsilon", c.epsilon);
        c.max_epochs = h.value("max_epochs", c.max_epochs);
        c.patience = h.value("patience", c.patience);
        c.batch_size = h.value("batch_size", c.batch_size);
        c.seed = h.value("seed", c.seed);
        c.l2_normalize = h.value("l2_normalize", c.l2_normalize);
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, kModule, std::string("bad model file: ") + e.what());
  }
}

void save_head(const HeadModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, kModule, "cannot write " + path.string());
  out << to_json(model).dump(2) << '\n';
  if (!out) throw Error(ErrorKind::io, kModule, "write failed for " + path.string());
}

HeadModel load_head(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, kModule, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, kModule, path.string() + ": " + e.what());
  }
  return head_from_json(j);
}

}  // namespace fakeidet
