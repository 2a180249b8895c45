#include "abm/train.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "abm/metrics.hpp"
#include "json.hpp"

namespace abm {

using nn::Graph;
using nn::Var;

namespace {

constexpr std::uint64_t kShuffleStream = 1ULL << 60;

}  // namespace

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::kTbm2: return "TBM2";
    case Ablation::kAbmS: return "ABM_S";
    case Ablation::kAbmC: return "ABM_C";
    case Ablation::kAbm: return "ABM";
  }
  return "?";
}

Ablation parse_ablation(std::string_view s) {
  if (s == "TBM2") return Ablation::kTbm2;
  if (s == "ABM_S") return Ablation::kAbmS;
  if (s == "ABM_C") return Ablation::kAbmC;
  if (s == "ABM") return Ablation::kAbm;
  throw ConfigError("unknown ablation '" + std::string(s) + "' (TBM2, ABM_S, ABM_C, ABM)");
}

LossWeights TrainConfig::effective_weights() const {
  LossWeights w = weights;
  if (ablation == Ablation::kTbm2 || ablation == Ablation::kAbmC) w.contrastive = 0.0;
  if (ablation == Ablation::kTbm2 || ablation == Ablation::kAbmS) w.domain_intent = 0.0;
  return w;
}

void TrainConfig::validate() const {
  model.validate();
  weights.validate();
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(tau > 0.0)) throw ConfigError("train.tau must be positive");
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv) {
  TrainConfig c;
  c.model = AbmConfig::from_kv(kv);
  c.weights.contrastive = kv.get_double("train.w1", c.weights.contrastive);
  c.weights.domain_intent = kv.get_double("train.w2", c.weights.domain_intent);
  c.lr = kv.get_double("train.lr", c.lr);
  const long long batch = kv.get_int("train.batch_size", static_cast<long long>(c.batch_size));
  const long long epochs = kv.get_int("train.epochs", static_cast<long long>(c.epochs));
  if (batch < 0 || epochs < 0) throw ConfigError("train.batch_size and train.epochs must be >= 0");
  c.batch_size = static_cast<std::size_t>(batch);
  c.epochs = static_cast<std::size_t>(epochs);
  c.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", static_cast<long long>(c.seed)));
  c.tau = kv.get_double("train.tau", c.tau);
  c.ablation = parse_ablation(kv.get_string("train.ablation", std::string(to_string(c.ablation))));
  const std::string precision = kv.get_string("train.precision", "float32");
  if (precision != "float32" && precision != "float64")
    throw ConfigError("train.precision must be float32 or float64");
  c.double_precision = precision == "float64";
  c.force_auxiliary = kv.get_bool("train.force_auxiliary", false);
  c.validate();
  return c;
}

void TrainConfig::to_kv(KvConfig& kv) const {
  model.to_kv(kv);
  kv.set("train.w1", weights.contrastive);
  kv.set("train.w2", weights.domain_intent);
  kv.set("train.lr", lr);
  kv.set("train.batch_size", static_cast<long long>(batch_size));
  kv.set("train.epochs", static_cast<long long>(epochs));
  kv.set("train.seed", static_cast<long long>(seed));
  kv.set("train.tau", tau);
  kv.set("train.ablation", std::string(to_string(ablation)));
  kv.set("train.precision", std::string(double_precision ? "float64" : "float32"));
  kv.set("train.force_auxiliary", force_auxiliary);
}

std::string StepRecord::to_json_line() const {
  nlohmann::ordered_json j;
  j["kind"] = "step";
  j["step"] = step;
  j["epoch"] = epoch;
  j["L"] = total;
  j["L_main"] = main;
  j["L_self"] = self_loss;
  j["L_cl"] = cl_loss;
  return j.dump();
}

std::string EpochRecord::to_json_line() const {
  nlohmann::ordered_json j;
  j["kind"] = "epoch";
  j["epoch"] = epoch;
  j["mean_L"] = mean_loss;
  j["valid_auc"] = valid_auc ? nlohmann::ordered_json(*valid_auc) : nlohmann::ordered_json(nullptr);
  j["valid_L_main"] = valid_main_loss;
  return j.dump();
}

std::vector<TrainingExample> make_examples(const std::vector<LabeledSession>& records, std::size_t turns) {
  std::vector<TrainingExample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(make_example(r, turns));
  return out;
}

template <typename T>
std::vector<double> predict_all(const AbmModel<T>& model, const std::vector<TrainingExample>& examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(model.predict(ex));
  return out;
}

template <typename T>
Trainer<T>::Trainer(AbmModel<T>& model, const TrainConfig& config)
    : model_(model),
      config_(config),
      weights_(config.effective_weights()),
      adam_(model.params(), nn::AdamOptions{config.lr, 0.9, 0.999, 1e-8}) {
  config_.validate();
  if (!(config_.model == model.config())) throw ConfigError("train config and model config differ");
}

template <typename T>
StepRecord Trainer<T>::step(const std::vector<const TrainingExample*>& batch) {
  if (batch.empty()) throw ContractError("empty training batch");
  const std::uint64_t id = static_cast<std::uint64_t>(step_) << 2;
  Rng main_rng = Rng::stream(config_.seed, id);
  Graph<T> g;
  const RunOptions run{true, &main_rng};
  std::vector<Var> probs, seps;
  std::vector<int> labels, classes;
  for (const TrainingExample* ex : batch) {
    const auto f = model_.forward(g, *ex, run);
    probs.push_back(f.p);
    seps.push_back(f.session.sep_current);
    labels.push_back(ex->label);
    classes.push_back(ex->domain_intent);
  }
  const Var main = main_loss(g, probs, labels);

  Var self_loss, cl_loss;
  if (weights_.contrastive > 0.0 || config_.force_auxiliary) {
    Rng view_a = Rng::stream(config_.seed, id | 1);
    Rng view_b = Rng::stream(config_.seed, id | 2);
    const auto queries = contrastive_queries(batch);
    self_loss = simcse_loss(g, contrastive_views(g, model_, queries, config_.tau, view_a, view_b));
  }
  if (weights_.domain_intent > 0.0 || config_.force_auxiliary) {
    const Var logits = model_.domain_intent_logits(g, nn::concat_rows(g, seps));
    cl_loss = domain_intent_loss(g, logits, std::span<const int>(classes));
  }
  const Var total = total_loss(g, main, self_loss, cl_loss, weights_);

  StepRecord rec;
  rec.step = step_ + 1;
  rec.epoch = epoch_;
  rec.total = static_cast<double>(g.value(total).data[0]);
  rec.main = static_cast<double>(g.value(main).data[0]);
  rec.self_loss = self_loss.valid() ? static_cast<double>(g.value(self_loss).data[0]) : 0.0;
  rec.cl_loss = cl_loss.valid() ? static_cast<double>(g.value(cl_loss).data[0]) : 0.0;
  if (!std::isfinite(rec.total)) {
    model_.params().zero_grad();
    throw NonFiniteError("non-finite loss at step " + std::to_string(rec.step));
  }
  g.backward(total);
  adam_.step();
  ++step_;
  log_.push_back(rec);
  return rec;
}

template <typename T>
double Trainer<T>::run_epoch(const std::vector<TrainingExample>& train, std::ostream* history) {
  if (train.empty()) throw ContractError("empty training set");
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle = Rng::stream(config_.seed, kShuffleStream | epoch_);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);

  double sum = 0.0;
  std::size_t batches = 0;
  std::vector<const TrainingExample*> batch;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    batch.clear();
    for (std::size_t i = start; i < std::min(order.size(), start + config_.batch_size); ++i)
      batch.push_back(&train[order[i]]);
    const StepRecord rec = step(batch);
    if (history) *history << rec.to_json_line() << '\n';
    sum += rec.total;
    ++batches;
  }
  ++epoch_;
  return sum / static_cast<double>(batches);
}

template <typename T>
TrainResult Trainer<T>::train(const std::vector<TrainingExample>& train, const std::vector<TrainingExample>& valid,
                              std::ostream* history) {
  TrainResult result;
  auto best = model_.snapshot();
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < config_.epochs; ++e) {
    auto last_good = model_.snapshot();
    EpochRecord rec;
    rec.epoch = epoch_;
    try {
      rec.mean_loss = run_epoch(train, history);
    } catch (const NonFiniteError& err) {
      model_.restore(result.best_valid_auc ? best : last_good);
      result.aborted = true;
      result.abort_reason = err.what();
      break;
    }
    if (!valid.empty()) {
      const auto scores = predict_all(model_, valid);
      std::vector<int> labels;
      double loss = 0.0;
      for (std::size_t i = 0; i < valid.size(); ++i) {
        labels.push_back(valid[i].label);
        loss += nn::binary_cross_entropy_value(scores[i], valid[i].label);
      }
      rec.valid_main_loss = loss / static_cast<double>(valid.size());
      try {
        rec.valid_auc = evaluate_auc(scores, labels);
      } catch (const UndefinedMetricError&) {
      }
    }
    if (history) *history << rec.to_json_line() << '\n';
    result.epochs.push_back(rec);
    // Single-class validation data has no AUC; fall back to the validation loss.
    bool improved = valid.empty();
    if (rec.valid_auc) improved = !result.best_valid_auc || *rec.valid_auc > *result.best_valid_auc;
    else if (!valid.empty() && !result.best_valid_auc) improved = rec.valid_main_loss < best_loss;
    if (improved) {
      best_loss = rec.valid_main_loss;
      result.best_valid_auc = rec.valid_auc;
      result.best_epoch = rec.epoch;
      best = model_.snapshot();
    }
  }
  if (!result.aborted && !result.epochs.empty()) model_.restore(best);
  result.steps = log_;
  return result;
}

nn::GradCheckResult check_training_gradients(const TrainConfig& config, const std::vector<TrainingExample>& batch,
                                             const nn::GradCheckOptions& options) {
  if (batch.empty()) throw ContractError("gradient check needs at least one example");
  AbmModel<double> model(config.model);
  Rng jitter = Rng::stream(options.seed, 7);
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    auto& p = model.params()[i];
    if (p.name.rfind("emb.", 0) != 0) continue;
    for (double& v : p.value.data) v += 1e-3 * jitter.normal();
  }
  const LossWeights weights = config.effective_weights();
  std::vector<const TrainingExample*> pointers;
  for (const auto& ex : batch) pointers.push_back(&ex);
  const auto queries = contrastive_queries(pointers);
  const nn::LossBuilder loss = [&](Graph<double>& g) {
    Rng main_rng = Rng::stream(config.seed, 0);
    Rng view_a = Rng::stream(config.seed, 1);
    Rng view_b = Rng::stream(config.seed, 2);
    std::vector<Var> probs, seps;
    std::vector<int> labels, classes;
    for (const auto& ex : batch) {
      const auto f = model.forward(g, ex, RunOptions{true, &main_rng});
      probs.push_back(f.p);
      seps.push_back(f.session.sep_current);
      labels.push_back(ex.label);
      classes.push_back(ex.domain_intent);
    }
    const Var main = main_loss(g, probs, labels);
    const Var self_loss = simcse_loss(g, contrastive_views(g, model, queries, config.tau, view_a, view_b));
    const Var cl_loss = domain_intent_loss(g, model.domain_intent_logits(g, nn::concat_rows(g, seps)),
                                           std::span<const int>(classes));
    return total_loss(g, main, self_loss, cl_loss, weights);
  };
  return nn::grad_check(model.params(), loss, options);
}

template class Trainer<float>;
template class Trainer<double>;
template std::vector<double> predict_all<float>(const AbmModel<float>&, const std::vector<TrainingExample>&);
template std::vector<double> predict_all<double>(const AbmModel<double>&, const std::vector<TrainingExample>&);

}  // namespace abm
