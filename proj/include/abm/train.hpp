#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "abm/adam.hpp"
#include "abm/aux_tasks.hpp"
#include "abm/gradcheck.hpp"

namespace abm {

enum class Ablation { kTbm2, kAbmS, kAbmC, kAbm };
std::string_view to_string(Ablation a);
Ablation parse_ablation(std::string_view s);  // "TBM2", "ABM_S", "ABM_C", "ABM"

struct TrainConfig {
  AbmConfig model;
  LossWeights weights;  // w1, w2 before the ablation mask
  double lr = 1.2e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  double tau = 0.05;
  Ablation ablation = Ablation::kAbm;
  bool double_precision = false;
  // Evaluate the auxiliary terms even when their weight is zero.
  bool force_auxiliary = false;

  /// TBM2 -> (0,0), ABM_S -> (w1,0), ABM_C -> (0,w2), ABM -> (w1,w2).
  LossWeights effective_weights() const;
  void validate() const;
  // "train." keys plus the "model." keys of the architecture.
  static TrainConfig from_kv(const KvConfig& kv);
  void to_kv(KvConfig& kv) const;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double total = 0.0;
  double main = 0.0;
  double self_loss = 0.0;
  double cl_loss = 0.0;
  std::string to_json_line() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> valid_auc;
  double valid_main_loss = 0.0;
  std::string to_json_line() const;
};

struct TrainResult {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::optional<double> best_valid_auc;
  bool aborted = false;
  std::string abort_reason;
};

/// Mini-batch Adam on the weighted total loss. Batch order and every dropout
/// mask come from counter-based streams of the seed, so equal configs give
/// equal trajectories.
template <typename T>
class Trainer {
 public:
  Trainer(AbmModel<T>& model, const TrainConfig& config);

  StepRecord step(const std::vector<const TrainingExample*>& batch);
  /// One shuffled pass; returns the mean total loss.
  double run_epoch(const std::vector<TrainingExample>& train, std::ostream* history = nullptr);

  /// Runs config.epochs epochs, validating after each and keeping the best
  /// validation-AUC parameters. A non-finite loss or gradient stops training
  /// with the last good parameters restored.
  TrainResult train(const std::vector<TrainingExample>& train, const std::vector<TrainingExample>& valid,
                    std::ostream* history = nullptr);

  std::size_t steps_taken() const { return step_; }
  const std::vector<StepRecord>& step_log() const { return log_; }

 private:
  AbmModel<T>& model_;
  TrainConfig config_;
  LossWeights weights_;
  nn::Adam<T> adam_;
  std::size_t step_ = 0;
  std::size_t epoch_ = 0;
  std::vector<StepRecord> log_;
};

template <typename T>
std::vector<double> predict_all(const AbmModel<T>& model, const std::vector<TrainingExample>& examples);

/// Central-difference check of the full weighted training loss (main plus
/// both auxiliary terms, dropout masks fixed per evaluation) in 64-bit on a
/// small batch. Embedding tables get a small jitter so reduce-max has no ties.
nn::GradCheckResult check_training_gradients(const TrainConfig& config, const std::vector<TrainingExample>& batch,
                                             const nn::GradCheckOptions& options = {});

std::vector<TrainingExample> make_examples(const std::vector<LabeledSession>& records, std::size_t turns);

}  // namespace abm
