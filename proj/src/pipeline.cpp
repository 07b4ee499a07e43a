#include "nfol/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "nfol/error.hpp"
#include "nfol/optim.hpp"

namespace nfol {

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int k = std::max(1, std::min(threads, n));
  if (k == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::exception_ptr first;
  auto run = [&](int lo, int hi) {
    try {
      for (int i = lo; i < hi; ++i) fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!first) first = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(k);
  for (int w = 0; w < k; ++w) {
    const int lo = static_cast<int>(static_cast<long>(n) * w / k);
    const int hi = static_cast<int>(static_cast<long>(n) * (w + 1) / k);
    pool.emplace_back(run, lo, hi);
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

int default_threads() {
  if (const char* env = std::getenv("NFOL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) return static_cast<int>(v);
    throw Error(ErrorKind::Usage, "NFOL_THREADS must be a positive integer");
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

std::vector<Featurization> featurize_dataset(const Dataset& d, const CorruptionSpec& spec,
                                             uint64_t seed) {
  std::vector<Featurization> out(d.scenes.size());
  for (size_t i = 0; i < d.scenes.size(); ++i)
    out[i] = make_featurization(d.scenes[i], d.vocab, spec,
                                scene_stream_seed(seed, d.scene_ids[i]));
  return out;
}

std::vector<AnswerRecord> answer_with_golden(const Dataset& d, double theta, int threads) {
  std::vector<AnswerRecord> out(d.questions.size());
  parallel_for(static_cast<int>(d.questions.size()), threads, [&](int i) {
    const Question& q = d.questions[i];
    GoldenOracle oracle(d.scene_of(q), d.vocab);
    Answer a = answer(q.compiled, oracle, theta);
    out[i] = {q.id, a.text, a.likelihood};
  });
  return out;
}

namespace {

// Question indices per scene, in dataset order.
std::vector<std::vector<int>> questions_by_scene(const Dataset& d) {
  std::vector<std::vector<int>> out(d.scenes.size());
  for (size_t i = 0; i < d.questions.size(); ++i)
    out[d.scene_index.at(d.questions[i].scene_id)].push_back(static_cast<int>(i));
  return out;
}

}  // namespace

std::vector<AnswerRecord> answer_with_model(const Dataset& d, const OracleModel& model,
                                            const ContextTable* calibration,
                                            const AnswerConfig& cfg) {
  const std::vector<Featurization> feats = featurize_dataset(d, cfg.corruption, cfg.seed);
  const std::vector<std::vector<int>> per_scene = questions_by_scene(d);
  std::vector<AnswerRecord> out(d.questions.size());
  // One worker unit per scene so all of a scene's questions share a single
  // oracle forward pass (everything is constant, so the tape stays empty).
  parallel_for(static_cast<int>(d.scenes.size()), cfg.threads, [&](int s) {
    if (per_scene[s].empty()) return;
    Tape tape;
    BoundModel bound = BoundModel::bind(tape, model, false);
    NeuralOracle oracle(tape, bound, d.vocab, feats[s]);
    ExecOptions opt;
    opt.mode = ExecMode::Exact;
    opt.calibration = calibration;
    for (int qi : per_scene[s]) {
      const Question& q = d.questions[qi];
      Answer a = answer(q.compiled, oracle, cfg.theta, opt);
      out[qi] = {q.id, a.text, a.likelihood};
    }
  });
  return out;
}

// ------------------------------------------------------------ calibration --

namespace {

template <typename T>
void shuffle_pinned(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = rng() % i;
    std::swap(v[i - 1], v[j]);
  }
}

DiffValue bce(Tape& t, const DiffValue& pred, double target) {
  const double eps = 1e-7;
  DiffValue p = clamp(t, pred, eps, 1.0 - eps);
  DiffValue pos = mul(t, constant(target), log(t, p));
  DiffValue neg = mul(t, constant(1.0 - target), log(t, sub(t, constant(1.0), p)));
  return sub(t, constant(0.0), add(t, pos, neg));
}

DiffValue question_loss(Tape& t, const Question& q, const EngineOutput& out) {
  if (!q.open) return bce(t, out.terminal, q.gold == "yes" ? 1.0 : 0.0);
  DiffValue total = constant(0.0);
  for (size_t c = 0; c < out.candidate_values.size(); ++c) {
    const double target = out.candidates[c] == q.gold ? 1.0 : 0.0;
    total = add(t, total, bce(t, out.candidate_values[c], target));
  }
  return div(t, total, constant(static_cast<double>(out.candidate_values.size())));
}

std::string relate_key_token(const DfolStep& s) {
  std::string key = s.concepts[0];
  for (size_t k = 1; k < s.concepts.size(); ++k) key += "+" + s.concepts[k];
  return key;
}

// Calibration contexts a compiled program touches, in engine order.
void collect_contexts(const DfolProgram& p, std::set<std::string>& keys, bool& uses_relation) {
  for (size_t i = 0; i < p.steps.size(); ++i) {
    const DfolStep& s = p.steps[i];
    if (s.kind == DfolOpKind::Filter)
      keys.insert(ContextTable::make_key(s.concepts[0], static_cast<int>(i)));
    if (s.kind == DfolOpKind::Relate) {
      keys.insert(ContextTable::make_key(relate_key_token(s), static_cast<int>(i)));
      uses_relation = true;
    }
  }
}

// Frozen per-scene attention matrices; every query is served as a constant.
class FrozenSceneOracle : public VisualOracle {
 public:
  FrozenSceneOracle(const OracleModel& model, const ConceptVocabulary& vocab,
                    const Featurization& feats, bool need_relation)
      : vocab_(vocab), n_(feats.size()) {
    Tape tape;
    BoundModel bound = BoundModel::bind(tape, model, false);
    std::vector<double> flat;
    flat.reserve(static_cast<size_t>(n_) * feats.dim);
    for (const auto& v : feats.vectors) flat.insert(flat.end(), v.begin(), v.end());
    DiffValue x = constant(Tensor::matrix(n_, feats.dim, std::move(flat)));
    unary_ = oracle_unary_forward(tape, bound, x, {}).value;
    if (need_relation) relation_ = oracle_relation_forward(tape, bound, x, {}).value;
  }

  int object_count() const override { return n_; }

  DiffValue unary_attention(Tape&, const std::string& token) override {
    const int c = vocab_.unary_index(token);
    Tensor out = Tensor::vector(n_, 0.0);
    for (int i = 0; i < n_; ++i) out[i] = unary_.at(i, c);
    return constant(std::move(out));
  }

  DiffValue relation_attention(Tape&, const std::string& rel) override {
    if (relation_.size() == 1)
      throw Error(ErrorKind::Contract, "relation attention was not precomputed");
    const int c = vocab_.binary_index(rel);
    Tensor out = Tensor::matrix(n_, n_, 0.0);
    for (int i = 0; i < n_ * n_; ++i) out[i] = relation_.at(i, c);
    return constant(std::move(out));
  }

 private:
  const ConceptVocabulary& vocab_;
  int n_;
  Tensor unary_;
  Tensor relation_;
};

class BoundTable : public CalibrationApplier {
 public:
  std::map<std::string, std::array<DiffValue, 4>> bound;
  std::array<DiffValue, 4> fallback;

  DiffValue apply(Tape& t, const std::string& key, const DiffValue& alpha,
                  ExecMode mode) const override {
    auto it = bound.find(key);
    const auto& r = it != bound.end() ? it->second : fallback;
    return calibrate_raw(t, alpha, r[0], r[1], r[2], r[3], mode);
  }
};

}  // namespace

FitStats fit_calibration(ContextTable& table, const OracleModel& model, const Dataset& d,
                         const FitConfig& cfg) {
  if (d.questions.empty())
    throw Error(ErrorKind::Contract, "cannot fit calibration on an empty dataset");
  if (cfg.batch_size <= 0 || cfg.epochs <= 0)
    throw Error(ErrorKind::Training, "batch size and epoch count must be positive");

  std::set<std::string> key_set;
  std::vector<bool> scene_needs_relation(d.scenes.size(), false);
  for (const Question& q : d.questions) {
    bool rel = false;
    collect_contexts(q.compiled, key_set, rel);
    if (rel) scene_needs_relation[d.scene_index.at(q.scene_id)] = true;
  }
  const std::vector<std::string> keys(key_set.begin(), key_set.end());

  const CalibParams id = CalibParams::identity();
  table.defaults = id;
  table.vocab_hash = d.vocab.hash();
  table.entries.clear();
  for (const auto& k : keys) table.entries[k] = id;

  // The oracle is frozen: run each scene's forward pass once and keep the
  // attention matrices as plain tensors for every epoch.
  const std::vector<Featurization> feats = featurize_dataset(d, cfg.corruption, cfg.seed);
  std::vector<std::unique_ptr<FrozenSceneOracle>> oracles(d.scenes.size());
  for (size_t s = 0; s < d.scenes.size(); ++s)
    oracles[s] = std::make_unique<FrozenSceneOracle>(model, d.vocab, feats[s],
                                                     scene_needs_relation[s]);

  // One scalar tensor per raw parameter, key-major.
  std::vector<Tensor> raws(keys.size() * 4);
  for (size_t k = 0; k < keys.size(); ++k) {
    raws[4 * k + 0] = Tensor::scalar(id.raw_a);
    raws[4 * k + 1] = Tensor::scalar(id.raw_b);
    raws[4 * k + 2] = Tensor::scalar(id.raw_c);
    raws[4 * k + 3] = Tensor::scalar(id.raw_d);
  }
  std::vector<Tensor*> params;
  params.reserve(raws.size());
  for (auto& r : raws) params.push_back(&r);

  AdamConfig acfg;
  acfg.lr = cfg.lr;
  acfg.weight_decay = 0.0;
  AdamState state;
  std::mt19937_64 order_rng(cfg.seed ^ 0x6a09e667f3bcc909ULL);

  FitStats stats;
  std::vector<int> order(d.questions.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_pinned(order, order_rng);
    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t stop = std::min(order.size(), start + cfg.batch_size);
      Tape tape;
      BoundTable bt;
      bt.fallback = {constant(id.raw_a), constant(id.raw_b), constant(id.raw_c),
                     constant(id.raw_d)};
      for (size_t k = 0; k < keys.size(); ++k)
        bt.bound[keys[k]] = {tape.leaf(raws[4 * k + 0]), tape.leaf(raws[4 * k + 1]),
                             tape.leaf(raws[4 * k + 2]), tape.leaf(raws[4 * k + 3])};

      DiffValue batch_loss = constant(0.0);
      for (size_t i = start; i < stop; ++i) {
        const Question& q = d.questions[order[i]];
        const int s = d.scene_index.at(q.scene_id);
        ExecOptions opt;
        opt.mode = ExecMode::Training;
        opt.calibration = &bt;
        EngineOutput out = execute(q.compiled, *oracles[s], tape, opt);
        batch_loss = add(tape, batch_loss, question_loss(tape, q, out));
      }
      batch_loss = div(tape, batch_loss, constant(static_cast<double>(stop - start)));
      const double lv = batch_loss.value.scalar_value();
      if (!std::isfinite(lv))
        throw Error(ErrorKind::Training,
                    "calibration loss diverged at epoch " + std::to_string(epoch + 1));
      loss_sum += lv * static_cast<double>(stop - start);

      std::vector<Tensor> all = tape.backward(batch_loss);
      std::vector<Tensor> grads;
      grads.reserve(keys.size() * 4);
      for (size_t k = 0; k < keys.size(); ++k)
        for (int r = 0; r < 4; ++r) grads.push_back(std::move(all[bt.bound[keys[k]][r].id]));
      clip_global_norm(grads, cfg.clip_norm);
      adam_step(params, grads, state, acfg);
    }
    stats.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
  }

  for (size_t k = 0; k < keys.size(); ++k) {
    CalibParams p;
    p.raw_a = raws[4 * k + 0].scalar_value();
    p.raw_b = raws[4 * k + 1].scalar_value();
    p.raw_c = raws[4 * k + 2].scalar_value();
    p.raw_d = raws[4 * k + 3].scalar_value();
    table.entries[keys[k]] = p;
  }
  stats.entries = static_cast<int>(keys.size());
  return stats;
}

std::pair<Dataset, Dataset> partition_dataset(const Dataset& d, int train_scenes) {
  if (train_scenes < 0 || train_scenes > static_cast<int>(d.scenes.size()))
    throw Error(ErrorKind::Contract, "train scene count is out of range");
  Dataset a, b;
  a.vocab = d.vocab;
  b.vocab = d.vocab;
  for (size_t i = 0; i < d.scenes.size(); ++i) {
    Dataset& dst = static_cast<int>(i) < train_scenes ? a : b;
    dst.scene_index[d.scene_ids[i]] = static_cast<int>(dst.scenes.size());
    dst.scene_ids.push_back(d.scene_ids[i]);
    dst.scenes.push_back(d.scenes[i]);
  }
  for (const Question& q : d.questions) {
    Dataset& dst = d.scene_index.at(q.scene_id) < train_scenes ? a : b;
    dst.question_index[q.id] = static_cast<int>(dst.questions.size());
    dst.questions.push_back(q);
  }
  return {std::move(a), std::move(b)};
}

}  // namespace nfol
