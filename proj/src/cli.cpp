#include "abm/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "abm/checkpoint.hpp"
#include "abm/corpus_io.hpp"
#include "abm/metrics.hpp"
#include "abm/report.hpp"
#include "abm/serving.hpp"
#include "abm/synth.hpp"
#include "abm/train.hpp"

namespace abm {

namespace fs = std::filesystem;

namespace {

std::string format_p(double p) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9f", p);
  return buf;
}

KvConfig load_config(const std::string& path) { return path.empty() ? KvConfig{} : KvConfig::load(path); }

fs::path serve_config_path(const std::string& ckpt) { return ckpt + ".serve.cfg"; }

struct LoadedModel {
  std::unique_ptr<AbmModel<float>> model;
  std::string id;
};

LoadedModel load_model(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return {model_from_checkpoint<float>(bytes), model_id(bytes)};
}

std::vector<int> labels_of(const std::vector<TrainingExample>& examples) {
  std::vector<int> out;
  for (const auto& e : examples) out.push_back(e.label);
  return out;
}

int cmd_gen(const std::string& config, const std::string& out_dir, std::optional<std::uint64_t> seed,
            std::ostream& out) {
  synth::GeneratorConfig cfg = synth::GeneratorConfig::from_kv(load_config(config));
  if (seed) cfg.seed = *seed;
  cfg.validate();
  const synth::Corpus corpus = synth::generate_corpus(cfg);
  synth::write_corpus_dir(out_dir, cfg, corpus);
  out << "train\t" << corpus.train.size() << '\t' << corpus_id(corpus.train) << '\n'
      << "valid\t" << corpus.valid.size() << '\t' << corpus_id(corpus.valid) << '\n'
      << "test\t" << corpus.test.size() << '\t' << corpus_id(corpus.test) << '\n';
  return 0;
}

template <typename T>
int train_with(const TrainConfig& tc, const synth::LoadedCorpus& data, const std::string& ckpt,
               const std::string& history_path, double floor, std::ostream& out, std::ostream& err) {
  const auto train = make_examples(data.corpus.train, tc.model.turns);
  const auto valid = make_examples(data.corpus.valid, tc.model.turns);
  AbmModel<T> model(tc.model);
  Trainer<T> trainer(model, tc);
  std::ofstream history(history_path, std::ios::binary | std::ios::trunc);
  if (!history) throw ContractError("cannot write " + history_path);
  const TrainResult result = trainer.train(train, valid, &history);

  save_checkpoint(model, ckpt);
  std::ofstream(ckpt + ".card.txt", std::ios::binary) << model_card(model);
  KvConfig serve;
  std::optional<double> theta;
  if (!valid.empty()) {
    try {
      theta = select_threshold(predict_all(model, valid), labels_of(valid), floor);
    } catch (const UndefinedMetricError& e) {
      err << "threshold selection skipped: " << e.what() << '\n';
    }
  }
  serve.set("serve.floor", floor);
  serve.set("serve.gating", theta.has_value());
  if (theta) serve.set("serve.threshold", *theta);
  serve.save(serve_config_path(ckpt));

  const std::string id = model_id(read_file_bytes(ckpt));
  out << "model\t" << id << "\nsteps\t" << result.steps.size() << "\nbest_epoch\t" << result.best_epoch
      << "\nvalid_auc\t" << (result.best_valid_auc ? format_double(*result.best_valid_auc) : "null")
      << "\nthreshold\t" << (theta ? format_double(*theta) : "disabled") << '\n';
  if (result.aborted) {
    err << "training aborted, kept last good parameters: " << result.abort_reason << '\n';
    return 1;
  }
  return 0;
}

int cmd_train(const std::string& config, const std::string& corpus_dir, const std::string& ckpt,
              const std::string& ablate, std::string history, std::ostream& out, std::ostream& err) {
  const KvConfig kv = load_config(config);
  TrainConfig tc = TrainConfig::from_kv(kv);
  if (!ablate.empty()) tc.ablation = parse_ablation(ablate);
  const synth::LoadedCorpus data = synth::read_corpus_dir(corpus_dir);
  // Vocabulary and label spaces come from the corpus unless the config pins them.
  if (!kv.has("model.vocab_size")) tc.model.vocab_size = data.config.vocab_size;
  if (!kv.has("model.num_domains")) tc.model.num_domains = data.config.num_domains;
  if (!kv.has("model.num_intents")) tc.model.num_intents = data.config.num_intents;
  if (!kv.has("model.num_slots")) tc.model.num_slots = data.config.num_slots;
  if (!kv.has("model.K")) tc.model.nbest = data.config.nbest;
  tc.validate();
  if (history.empty()) history = ckpt + ".history.jsonl";
  const double floor = kv.get_double("serve.floor", 0.85);
  return tc.double_precision ? train_with<double>(tc, data, ckpt, history, floor, out, err)
                             : train_with<float>(tc, data, ckpt, history, floor, out, err);
}

int cmd_eval(const std::string& ckpt, const std::string& corpus_dir, double floor, const std::string& report_path,
             std::ostream& out, std::ostream& err) {
  const LoadedModel m = load_model(ckpt);
  const synth::LoadedCorpus data = synth::read_corpus_dir(corpus_dir);
  const std::size_t turns = m.model->config().turns;
  const auto valid = make_examples(data.corpus.valid, turns);
  const auto test = make_examples(data.corpus.test, turns);
  std::optional<double> theta;
  if (!valid.empty()) theta = select_threshold(predict_all(*m.model, valid), labels_of(valid), floor);
  MetricsReport report =
      slice_report(test, predict_all(*m.model, test), theta, floor, data.config.num_domains,
                   DomainGroups::from_zipf(data.config.zipf_exponent, data.config.num_domains));
  report.model_id = m.id;
  report.corpus_id = corpus_id(data.corpus.test);
  const std::string json = report.to_json().dump(2);
  if (!report_path.empty()) {
    std::ofstream f(report_path, std::ios::binary | std::ios::trunc);
    if (!f) throw ContractError("cannot write " + report_path);
    f << json << '\n';
    std::ofstream(report_path + ".txt", std::ios::binary | std::ios::trunc) << report.to_table();
  }
  out << json << '\n';
  err << report.to_table();
  return 0;
}

int cmd_infer(const std::string& ckpt, std::optional<double> threshold, bool staged, std::istream& in,
              std::ostream& out) {
  const LoadedModel m = load_model(ckpt);
  if (!threshold) {
    const KvConfig serve = KvConfig::load(serve_config_path(ckpt));
    if (serve.get_bool("serve.gating", false)) threshold = serve.get_double("serve.threshold", 0.0);
  }
  const std::string theta = threshold ? format_p(*threshold) : "none";
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const TrainingExample ex = make_example(parse_line(line), m.model->config().turns);
    const Decision d = staged ? infer_staged(*m.model, ex, threshold, ex.session_id)
                              : infer_monolithic(*m.model, ex, threshold);
    out << ex.session_id << '\t' << format_p(d.p) << '\t' << to_string(d.kind) << '\t' << theta << '\t' << m.id
        << '\n';
  }
  return 0;
}

int cmd_gradcheck(const std::string& config, std::size_t coordinates, std::ostream& out, std::ostream& err) {
  const KvConfig kv = load_config(config);
  TrainConfig tc = TrainConfig::from_kv(kv);
  synth::GeneratorConfig gen = synth::GeneratorConfig::from_kv(kv);
  gen.train_sessions = static_cast<std::size_t>(kv.get_int("gradcheck.batch", 4));
  gen.valid_sessions = gen.test_sessions = 0;
  tc.model.vocab_size = gen.vocab_size;
  tc.model.num_domains = gen.num_domains;
  tc.model.num_intents = gen.num_intents;
  tc.model.num_slots = gen.num_slots;
  tc.model.nbest = gen.nbest;
  tc.ablation = Ablation::kAbm;
  const auto batch = make_examples(synth::generate_corpus(gen).train, tc.model.turns);
  nn::GradCheckOptions opt;
  opt.max_coordinates = coordinates;
  opt.seed = tc.seed;
  const auto start = std::chrono::steady_clock::now();
  const nn::GradCheckResult r = check_training_gradients(tc, batch, opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << "max_rel_error\t" << r.max_rel_error << "\nchecked\t" << r.checked << "\nworst\t" << r.worst_parameter
      << '[' << r.worst_index << "]\tanalytic " << r.worst_analytic << "\tnumeric " << r.worst_numeric << '\n';
  err << "gradcheck took " << secs << " s\n";
  return r.max_rel_error < 1e-4 ? 0 : 1;
}

int cmd_ab(const std::string& ckpt_a, const std::string& ckpt_b, const std::string& corpus_dir, double floor,
           std::ostream& out) {
  const LoadedModel a = load_model(ckpt_a);
  const LoadedModel b = load_model(ckpt_b);
  const synth::LoadedCorpus data = synth::read_corpus_dir(corpus_dir);
  const auto valid_a = make_examples(data.corpus.valid, a.model->config().turns);
  const auto valid_b = make_examples(data.corpus.valid, b.model->config().turns);
  const auto test_a = make_examples(data.corpus.test, a.model->config().turns);
  const auto test_b = make_examples(data.corpus.test, b.model->config().turns);
  const auto theta_a = select_threshold(predict_all(*a.model, valid_a), labels_of(valid_a), floor);
  const auto theta_b = select_threshold(predict_all(*b.model, valid_b), labels_of(valid_b), floor);
  const CusResult r =
      ab_compare_cus(test_a, predict_all(*a.model, test_a), predict_all(*b.model, test_b), theta_a, theta_b);
  nlohmann::ordered_json j;
  j["model_a"] = a.id;
  j["model_b"] = b.id;
  j["threshold_a"] = theta_a ? nlohmann::ordered_json(*theta_a) : nlohmann::ordered_json(nullptr);
  j["threshold_b"] = theta_b ? nlohmann::ordered_json(*theta_b) : nlohmann::ordered_json(nullptr);
  j["sessions_a"] = r.sessions_a;
  j["sessions_b"] = r.sessions_b;
  j["clarified_a"] = r.clarified_a;
  j["clarified_b"] = r.clarified_b;
  j["cus_a"] = r.cus_a;
  j["cus_b"] = r.cus_b;
  out << j.dump() << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Auxiliary-task user satisfaction model: corpus generation, training, evaluation, serving"};
  app.require_subcommand(1);

  std::string config, out_dir, corpus_dir, ckpt, ablate, history, report, ckpt_a, ckpt_b;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  double floor = 0.85;
  bool staged = false;
  std::size_t coordinates = 200;

  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  gen->add_option("--config", config, "generator config (key=value)");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--seed", seed, "overrides gen.seed");

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config, "model/train config (key=value)");
  train->add_option("--corpus", corpus_dir, "corpus directory")->required();
  train->add_option("--out", ckpt, "checkpoint path")->required();
  train->add_option("--ablate", ablate, "TBM2, ABM_S, ABM_C or ABM")
      ->check(CLI::IsMember({"TBM2", "ABM_S", "ABM_C", "ABM"}));
  train->add_option("--history", history, "training history (default <out>.history.jsonl)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval->add_option("--ckpt", ckpt, "checkpoint")->required();
  eval->add_option("--corpus", corpus_dir, "corpus directory")->required();
  eval->add_option("--floor", floor, "precision floor for CLA")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--report", report, "write the JSON report here");

  auto* infer = app.add_subcommand("infer", "score corpus records from standard input");
  infer->add_option("--ckpt", ckpt, "checkpoint")->required();
  infer->add_option("--threshold", threshold, "clarify when p <= threshold (default: <ckpt>.serve.cfg)");
  infer->add_flag("--staged", staged, "run the three-stage serving path");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the full training loss");
  grad->add_option("--config", config, "model/train/gen config (key=value)");
  grad->add_option("--coordinates", coordinates, "coordinates to sample");

  auto* ab = app.add_subcommand("ab", "simulated A/B comparison of two checkpoints");
  ab->add_option("--ckpt-a", ckpt_a, "checkpoint for group A")->required();
  ab->add_option("--ckpt-b", ckpt_b, "checkpoint for group B")->required();
  ab->add_option("--corpus", corpus_dir, "corpus directory")->required();
  ab->add_option("--floor", floor, "precision floor for threshold selection")->check(CLI::Range(0.0, 1.0));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gen) return cmd_gen(config, out_dir, seed, out);
    if (*train) return cmd_train(config, corpus_dir, ckpt, ablate, history, out, err);
    if (*eval) return cmd_eval(ckpt, corpus_dir, floor, report, out, err);
    if (*infer) return cmd_infer(ckpt, threshold, staged, in, out);
    if (*grad) return cmd_gradcheck(config, coordinates, out, err);
    if (*ab) return cmd_ab(ckpt_a, ckpt_b, corpus_dir, floor, out);
  } catch (const UndefinedMetricError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace abm
