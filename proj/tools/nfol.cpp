#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "nfol/calibration.hpp"
#include "nfol/error.hpp"
#include "nfol/harness.hpp"
#include "nfol/oracle_model.hpp"
#include "nfol/pipeline.hpp"
#include "nfol/selftest.hpp"
#include "nfol/vocab.hpp"

namespace {

using namespace nfol;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Data, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Data, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorKind::Data, "short write to '" + path + "'");
}

std::map<std::string, std::string> parse_meta(const std::vector<std::string>& kvs) {
  std::map<std::string, std::string> meta;
  for (const auto& kv : kvs) {
    const size_t pos = kv.find('=');
    if (pos == std::string::npos || pos == 0)
      throw Error(ErrorKind::Usage, "--meta entries use key=value, got '" + kv + "'");
    meta[kv.substr(0, pos)] = kv.substr(pos + 1);
  }
  return meta;
}

int parse_positive_int(const std::string& text, const std::string& what) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || v < 1)
    throw Error(ErrorKind::Usage, what + " must be a positive integer, got '" + text + "'");
  return v;
}

// "LEN:EPOCHS,LEN:EPOCHS,..." -> curriculum stages; empty string means none.
std::vector<std::pair<int, int>> parse_curriculum(const std::string& text) {
  std::vector<std::pair<int, int>> stages;
  if (text.empty()) return stages;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const size_t pos = item.find(':');
    if (pos == std::string::npos)
      throw Error(ErrorKind::Usage,
                  "--curriculum stages use LENGTH:EPOCHS, got '" + item + "'");
    stages.emplace_back(parse_positive_int(item.substr(0, pos), "curriculum length"),
                        parse_positive_int(item.substr(pos + 1), "curriculum epochs"));
  }
  return stages;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorKind::Usage, msg);
}

double answer_accuracy(const Dataset& d, const std::vector<AnswerRecord>& recs) {
  if (d.questions.empty()) return 0.0;
  int correct = 0;
  for (size_t i = 0; i < d.questions.size(); ++i)
    if (answer_correct(d.questions[i], recs[i].answer)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(d.questions.size());
}

int g_exit = 0;

void cmd_gen(const GenConfig& cfg, const std::string& out) {
  require(cfg.scenes >= 1, "--scenes must be at least 1");
  require(cfg.questions_per_scene >= 1, "--qps must be at least 1");
  require(cfg.min_objects >= 1, "--min-objects must be at least 1");
  require(cfg.max_objects >= cfg.min_objects, "--max-objects must be >= --min-objects");
  const Dataset d = generate(cfg);
  save_dataset(d, out);
  std::cout << "wrote " << out << ": " << d.scenes.size() << " scenes, "
            << d.questions.size() << " questions\n";
}

struct TrainFlags {
  std::string data, out, loss_curve, curriculum;
  uint64_t seed = 1;
  OracleConfig oracle;
  TrainConfig train;
};

void cmd_train_oracle(const TrainFlags& f) {
  require(f.train.epochs >= 1, "--epochs must be at least 1");
  require(f.train.lr > 0.0, "--lr must be positive");
  require(f.train.batch_size >= 1, "--batch-size must be at least 1");
  require(f.train.theta > 0.0 && f.train.theta < 1.0, "--theta must lie in (0,1)");
  require(f.train.corruption.rho >= 0.0 && f.train.corruption.rho <= 1.0,
          "--rho must lie in [0,1]");
  require(f.train.corruption.sigma >= 0.0, "--sigma must be nonnegative");
  require(f.oracle.hidden >= 1 && f.oracle.hidden_layers >= 1 && f.oracle.pair_proj >= 1,
          "--hidden, --layers and --pair-proj must be at least 1");
  require(f.oracle.dropout >= 0.0 && f.oracle.dropout < 1.0, "--dropout must lie in [0,1)");

  const Dataset d = load_dataset(f.data);
  OracleModel model(d.vocab, f.oracle, f.seed);
  TrainConfig cfg = f.train;
  cfg.seed = f.seed;
  cfg.curriculum = parse_curriculum(f.curriculum);
  const TrainStats stats = train_oracle(model, d, cfg);
  for (const auto& e : stats.epochs)
    std::printf("epoch %d cap %d questions %d loss %.6f accuracy %.4f\n", e.epoch,
                e.length_cap, e.questions, e.loss, e.accuracy);
  write_file(f.out, model.to_json_text());
  if (!f.loss_curve.empty()) write_file(f.loss_curve, loss_curve_csv(stats));
  std::cout << "wrote " << f.out << " (params " << hex64(model.param_hash()) << ")\n";
}

struct CalibrateFlags {
  std::string data, model, out;
  FitConfig fit;
};

void cmd_calibrate(const CalibrateFlags& f) {
  require(f.fit.epochs >= 1, "--epochs must be at least 1");
  require(f.fit.lr > 0.0, "--lr must be positive");
  require(f.fit.batch_size >= 1, "--batch-size must be at least 1");
  require(f.fit.corruption.rho >= 0.0 && f.fit.corruption.rho <= 1.0,
          "--rho must lie in [0,1]");
  require(f.fit.corruption.sigma >= 0.0, "--sigma must be nonnegative");

  const Dataset d = load_dataset(f.data);
  const OracleModel model = OracleModel::from_json_text(read_file(f.model), d.vocab);
  ContextTable table;
  const FitStats stats = fit_calibration(table, model, d, f.fit);
  for (size_t i = 0; i < stats.epoch_loss.size(); ++i)
    std::printf("epoch %zu loss %.6f\n", i + 1, stats.epoch_loss[i]);
  write_file(f.out, table.to_json_text());
  std::cout << "wrote " << f.out << " (" << stats.entries << " contexts)\n";
}

struct AnswerFlags {
  std::string data, out, model, calibration;
  bool golden = false;
  double theta = 0.5;
  CorruptionSpec corruption;
  uint64_t seed = 1;
  int threads = 0;  // 0 = hardware default
};

void cmd_answer(const AnswerFlags& f) {
  require(f.golden != !f.model.empty(), "pick exactly one of --golden or --model");
  require(f.calibration.empty() || !f.model.empty(), "--calibration requires --model");
  require(f.theta > 0.0 && f.theta < 1.0, "--theta must lie in (0,1)");
  require(f.corruption.rho >= 0.0 && f.corruption.rho <= 1.0, "--rho must lie in [0,1]");
  require(f.corruption.sigma >= 0.0, "--sigma must be nonnegative");
  require(f.threads >= 0, "--threads must be nonnegative");

  const Dataset d = load_dataset(f.data);
  const int threads = f.threads == 0 ? default_threads() : f.threads;
  std::vector<AnswerRecord> recs;
  if (f.golden) {
    recs = answer_with_golden(d, f.theta, threads);
  } else {
    const OracleModel model = OracleModel::from_json_text(read_file(f.model), d.vocab);
    std::optional<ContextTable> table;
    if (!f.calibration.empty()) {
      table = ContextTable::from_json_text(read_file(f.calibration));
      if (table->vocab_hash != 0 && table->vocab_hash != d.vocab.hash())
        throw Error(ErrorKind::Vocab,
                    "calibration table was fit against a different vocabulary");
    }
    AnswerConfig cfg;
    cfg.theta = f.theta;
    cfg.corruption = f.corruption;
    cfg.seed = f.seed;
    cfg.threads = threads;
    recs = answer_with_model(d, model, table ? &*table : nullptr, cfg);
  }
  write_file(f.out, answers_to_jsonl(recs));
  std::printf("answered %zu questions (accuracy %.4f)\n", recs.size(),
              answer_accuracy(d, recs));
}

void cmd_split(const std::string& data, const std::string& answers, const std::string& out,
               const std::vector<std::string>& meta) {
  const Dataset d = load_dataset(data);
  const auto base = answers_from_jsonl(read_file(answers));
  SplitReport s = make_split(d, base);
  s.meta = parse_meta(meta);
  s.meta["answers"] = answers;
  write_file(out, split_to_json_text(s));
  std::cout << "wrote " << out << ": " << s.easy.size() << " easy, " << s.hard.size()
            << " hard\n";
}

void cmd_eval(const std::string& data, const std::string& answers,
              const std::string& split_path, const std::string& out,
              const std::vector<std::string>& meta) {
  const Dataset d = load_dataset(data);
  const auto recs = answers_from_jsonl(read_file(answers));
  std::optional<SplitReport> split;
  if (!split_path.empty()) split = split_from_json_text(read_file(split_path));
  const ScoreReport report =
      reasoning_scores(d, recs, split ? &*split : nullptr, parse_meta(meta));
  const std::string text = report_to_json_text(report);
  if (!out.empty()) write_file(out, text);
  std::cout << text;
}

void cmd_selftest() {
  const std::vector<SuiteResult> suites = run_selftest_suites();
  bool all_ok = true;
  for (const auto& s : suites) {
    std::printf("%-24s %6d checks  %s\n", s.name.c_str(), s.checks,
                s.ok() ? "ok" : ("FAIL (" + std::to_string(s.failures) + ")").c_str());
    for (const auto& note : s.notes) std::printf("    %s\n", note.c_str());
    all_ok = all_ok && s.ok();
  }
  std::cout << (all_ok ? "selftest: pass\n" : "selftest: FAIL\n");
  if (!all_ok) g_exit = 5;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentiable first-order reasoning over scene graphs"};
  app.require_subcommand(1);

  GenConfig gen_cfg;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--out", gen_out, "dataset directory to write")->required();
  gen->add_option("--seed", gen_cfg.seed, "rng seed");
  gen->add_option("--scenes", gen_cfg.scenes, "number of scenes");
  gen->add_option("--qps", gen_cfg.questions_per_scene, "questions per scene");
  gen->add_option("--min-objects", gen_cfg.min_objects, "minimum objects per scene");
  gen->add_option("--max-objects", gen_cfg.max_objects, "maximum objects per scene");
  gen->callback([&] { cmd_gen(gen_cfg, gen_out); });

  TrainFlags tf;
  auto* train = app.add_subcommand("train-oracle", "train the soft visual oracle");
  train->add_option("--data", tf.data, "dataset directory")->required();
  train->add_option("--out", tf.out, "model checkpoint to write")->required();
  train->add_option("--seed", tf.seed, "rng seed (init and batching)");
  train->add_option("--epochs", tf.train.epochs, "training epochs");
  train->add_option("--lr", tf.train.lr, "Adam learning rate");
  train->add_option("--batch-size", tf.train.batch_size, "questions per batch");
  train->add_option("--clip-norm", tf.train.clip_norm, "global gradient norm cap");
  train->add_option("--weight-decay", tf.train.weight_decay, "decoupled weight decay");
  train->add_option("--rho", tf.train.corruption.rho, "concept swap probability");
  train->add_option("--sigma", tf.train.corruption.sigma, "feature noise scale");
  train->add_option("--theta", tf.train.theta, "binary decision threshold");
  train->add_option("--curriculum", tf.curriculum,
                    "program-length stages as LENGTH:EPOCHS,... before uncapped epochs");
  train->add_option("--hidden", tf.oracle.hidden, "hidden width");
  train->add_option("--layers", tf.oracle.hidden_layers, "hidden layers");
  train->add_option("--pair-proj", tf.oracle.pair_proj, "pair projection width");
  train->add_option("--dropout", tf.oracle.dropout, "hidden dropout rate");
  train->add_option("--loss-curve", tf.loss_curve, "write per-epoch csv here");
  train->callback([&] { cmd_train_oracle(tf); });

  CalibrateFlags cf;
  auto* cal = app.add_subcommand("calibrate", "fit the calibration table, oracle frozen");
  cal->add_option("--data", cf.data, "dataset directory")->required();
  cal->add_option("--model", cf.model, "trained oracle checkpoint")->required();
  cal->add_option("--out", cf.out, "calibration table to write")->required();
  cal->add_option("--seed", cf.fit.seed, "rng seed");
  cal->add_option("--epochs", cf.fit.epochs, "fit epochs");
  cal->add_option("--lr", cf.fit.lr, "Adam learning rate");
  cal->add_option("--batch-size", cf.fit.batch_size, "questions per batch");
  cal->add_option("--rho", cf.fit.corruption.rho, "concept swap probability");
  cal->add_option("--sigma", cf.fit.corruption.sigma, "feature noise scale");
  cal->add_option("--clip-norm", cf.fit.clip_norm, "global gradient norm cap");
  cal->callback([&] { cmd_calibrate(cf); });

  AnswerFlags af;
  auto* ans = app.add_subcommand("answer", "answer every question in a dataset");
  ans->add_option("--data", af.data, "dataset directory")->required();
  ans->add_option("--out", af.out, "answers jsonl to write")->required();
  ans->add_flag("--golden", af.golden, "use the golden scene-graph oracle");
  ans->add_option("--model", af.model, "trained oracle checkpoint");
  ans->add_option("--calibration", af.calibration, "calibration table (with --model)");
  ans->add_option("--theta", af.theta, "binary decision threshold");
  ans->add_option("--rho", af.corruption.rho, "concept swap probability");
  ans->add_option("--sigma", af.corruption.sigma, "feature noise scale");
  ans->add_option("--seed", af.seed, "rng seed for featurization");
  ans->add_option("--threads", af.threads, "worker threads (0 = hardware)");
  ans->callback([&] { cmd_answer(af); });

  std::string sp_data, sp_answers, sp_out;
  std::vector<std::string> sp_meta;
  auto* split = app.add_subcommand("split", "derive the easy/hard split from base answers");
  split->add_option("--data", sp_data, "dataset directory")->required();
  split->add_option("--answers", sp_answers, "base model answers jsonl")->required();
  split->add_option("--out", sp_out, "split json to write")->required();
  split->add_option("--meta", sp_meta, "extra key=value metadata")->take_all();
  split->callback([&] { cmd_split(sp_data, sp_answers, sp_out, sp_meta); });

  std::string ev_data, ev_answers, ev_split, ev_out;
  std::vector<std::string> ev_meta;
  auto* ev = app.add_subcommand("eval", "score answers; add --split for hard/easy metrics");
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--answers", ev_answers, "answers jsonl")->required();
  ev->add_option("--split", ev_split, "split json from the split command");
  ev->add_option("--out", ev_out, "also write the report here");
  ev->add_option("--meta", ev_meta, "extra key=value metadata")->take_all();
  ev->callback([&] { cmd_eval(ev_data, ev_answers, ev_split, ev_out, ev_meta); });

  auto* st = app.add_subcommand("selftest", "run the built-in property suites");
  st->callback([&] { cmd_selftest(); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << error_kind_name(e.kind) << ": " << e.what() << "\n";
    if (e.kind == ErrorKind::Usage) return 2;
    if (e.kind == ErrorKind::Numeric || e.kind == ErrorKind::Training) return 4;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 3;
  }
  return g_exit;
}
