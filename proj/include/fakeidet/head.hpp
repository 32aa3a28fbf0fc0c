#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fakeidet/embedding_io.hpp"
#include "fakeidet/errors.hpp"
#include "fakeidet/logistic.hpp"
#include "fakeidet/patch.hpp"

namespace fakeidet {

struct TrainConfig {
  double learning_rate = 0.00015;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_epochs = 150;
  int patience = 12;
  std::size_t batch_size = 64;  // 0 selects full-batch steps
  std::uint64_t seed = 0;
  bool l2_normalize = false;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam update. Throws TrainingAborted on a non-finite
// gradient, leaving params and state untouched.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& cfg);

// Raised when optimization cannot continue; diagnostics() says where.
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& message, nlohmann::json diagnostics);
  const nlohmann::json& diagnostics() const noexcept { return diagnostics_; }

 private:
  nlohmann::json diagnostics_;
};

// Embeddings paired with 0/1 labels (bona fide 0, attack 1).
struct LabeledEmbeddings {
  EmbeddingFile features;
  std::vector<std::uint8_t> labels;
};

// Labels come from the patch manifest; every embedded patch must be listed.
LabeledEmbeddings join_labels(EmbeddingFile features, std::span<const PatchRecord> manifest);

struct TrainMeta {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  double initial_train_loss = 0.0;
  double final_train_loss = 0.0;
  bool early_stopped = false;
  std::vector<double> val_history;
  TrainConfig config;
};

struct HeadModel {
  std::string backbone_id;
  std::size_t dim = 0;
  std::vector<double> weights;
  double bias = 0.0;
  bool l2_normalize = false;
  TrainMeta meta;

  double logit(std::span<const float> embedding) const;
};

// Per-epoch validation loss override, for exercising the stopping rule. It
// receives the 1-based epoch and the computed loss and returns the loss the
// trainer should act on.
using ValidationHook = std::function<double(int epoch, double computed_loss)>;

HeadModel train_head(const LabeledEmbeddings& train, const LabeledEmbeddings& val, const TrainConfig& cfg,
                     const ValidationHook& hook = {});

// Mean BCE of the model over a labeled set.
double mean_bce(const HeadModel& model, const LabeledEmbeddings& data);

double predict(const HeadModel& model, std::span<const float> embedding);
std::vector<double> predict_all(const HeadModel& model, const EmbeddingFile& file);

nlohmann::ordered_json to_json(const HeadModel& model);
HeadModel head_from_json(const nlohmann::json& j);
void save_head(const HeadModel& model, const std::filesystem::path& path);
HeadModel load_head(const std::filesystem::path& path);

}  // namespace fakeidet
