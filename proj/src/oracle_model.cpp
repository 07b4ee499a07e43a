#include "nfol/oracle_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "nfol/error.hpp"
#include "nfol/optim.hpp"

namespace nfol {

namespace {

// Uniform in [0, 1) built directly from the raw 64-bit stream so draws do not
// depend on the standard library's distribution internals.
double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

Tensor xavier(std::mt19937_64& rng, int rows, int cols) {
  const double s = std::sqrt(6.0 / (rows + cols));
  Tensor t = Tensor::matrix(rows, cols, 0.0);
  for (int i = 0; i < t.size(); ++i) t[i] = -s + 2.0 * s * u01(rng);
  return t;
}

}  // namespace

OracleModel::OracleModel(const ConceptVocabulary& vocab, const OracleConfig& cfg,
                         uint64_t init_seed)
    : vocab_(&vocab), cfg_(cfg) {
  if (cfg_.hidden <= 0 || cfg_.hidden_layers <= 0 || cfg_.pair_proj <= 0)
    throw Error(ErrorKind::Contract, "oracle model dimensions must be positive");
  if (cfg_.dropout < 0.0 || cfg_.dropout >= 1.0)
    throw Error(ErrorKind::Contract, "dropout rate must lie in [0, 1)");
  if (vocab.unary_count() == 0 || vocab.binary_count() == 0)
    throw Error(ErrorKind::Vocab, "oracle model needs unary and binary concepts");
  vocab_hash_ = vocab.hash();
  feat_dim_ = vocab.unary_count() + 4;
  unary_out_ = vocab.unary_count();
  relation_out_ = vocab.binary_count();
  init_params(init_seed);
}

void OracleModel::init_params(uint64_t seed) {
  std::mt19937_64 rng(seed);
  params_.clear();
  auto weight = [&](const std::string& name, int rows, int cols) {
    params_.push_back({name, xavier(rng, rows, cols)});
  };
  auto bias = [&](const std::string& name, int n) {
    params_.push_back({name, Tensor::vector(n, 0.0)});
  };
  const int h = cfg_.hidden;
  for (int l = 0; l < cfg_.hidden_layers; ++l) {
    const std::string i = std::to_string(l);
    weight("u.w" + i, l == 0 ? feat_dim_ : h, h);
    bias("u.b" + i, h);
  }
  weight("u.wout", h, unary_out_);
  bias("u.bout", unary_out_);

  weight("r.proj", feat_dim_, cfg_.pair_proj);
  bias("r.projb", cfg_.pair_proj);
  for (int l = 0; l < cfg_.hidden_layers; ++l) {
    const std::string i = std::to_string(l);
    weight("r.w" + i, l == 0 ? 2 * cfg_.pair_proj : h, h);
    bias("r.b" + i, h);
  }
  weight("r.wout", h, relation_out_);
  bias("r.bout", relation_out_);
}

std::vector<Tensor*> OracleModel::param_tensors() {
  std::vector<Tensor*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p.value);
  return out;
}

uint64_t OracleModel::param_hash() const { return fnv1a64(to_json_text()); }

std::string OracleModel::to_json_text() const {
  nlohmann::json j;
  j["version"] = 1;
  j["vocab_hash"] = hex64(vocab_hash_);
  j["config"] = {{"hidden", cfg_.hidden},
                 {"hidden_layers", cfg_.hidden_layers},
                 {"pair_proj", cfg_.pair_proj},
                 {"dropout", cfg_.dropout}};
  nlohmann::json params = nlohmann::json::object();
  for (const auto& p : params_) {
    params[p.name] = {{"rows", p.value.rows},
                      {"cols", p.value.cols},
                      {"rank", p.value.rank},
                      {"data", p.value.data}};
  }
  j["params"] = std::move(params);
  return j.dump(2) + "\n";
}

OracleModel OracleModel::from_json_text(const std::string& text,
                                        const ConceptVocabulary& vocab) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Data, std::string("model checkpoint: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != 1)
      throw Error(ErrorKind::Data, "model checkpoint: unsupported version");
    if (j.at("vocab_hash").get<std::string>() != hex64(vocab.hash()))
      throw Error(ErrorKind::Data,
                  "model checkpoint was trained against a different vocabulary");
    const auto& jc = j.at("config");
    OracleConfig cfg;
    cfg.hidden = jc.at("hidden").get<int>();
    cfg.hidden_layers = jc.at("hidden_layers").get<int>();
    cfg.pair_proj = jc.at("pair_proj").get<int>();
    cfg.dropout = jc.at("dropout").get<double>();
    OracleModel m(vocab, cfg, 0);
    const auto& jp = j.at("params");
    if (jp.size() != m.params_.size())
      throw Error(ErrorKind::Data, "model checkpoint: unexpected parameter count");
    for (auto& p : m.params_) {
      if (!jp.contains(p.name))
        throw Error(ErrorKind::Data, "model checkpoint: missing parameter " + p.name);
      const auto& e = jp.at(p.name);
      if (e.at("rows").get<int>() != p.value.rows ||
          e.at("cols").get<int>() != p.value.cols ||
          e.at("rank").get<int>() != p.value.rank)
        throw Error(ErrorKind::Data, "model checkpoint: bad shape for " + p.name);
      auto data = e.at("data").get<std::vector<double>>();
      if (static_cast<int>(data.size()) != p.value.size())
        throw Error(ErrorKind::Data, "model checkpoint: bad data length for " + p.name);
      p.value.data = std::move(data);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Data, std::string("model checkpoint: ") + e.what());
  }
}

BoundModel BoundModel::bind(Tape& t, const OracleModel& m, bool tracked) {
  BoundModel b;
  b.model = &m;
  b.values.reserve(m.params().size());
  for (const auto& p : m.params())
    b.values.push_back(tracked ? t.leaf(p.value, true) : constant(p.value));
  return b;
}

const DiffValue& BoundModel::operator[](const std::string& name) const {
  const auto& ps = model->params();
  for (size_t i = 0; i < ps.size(); ++i)
    if (ps[i].name == name) return values[i];
  throw Error(ErrorKind::Contract, "unknown model parameter " + name);
}

namespace {

DiffValue apply_dropout(Tape& t, const DiffValue& h, const DropoutCtx& drop) {
  if (!drop.rng || drop.rate <= 0.0) return h;
  Tensor mask = Tensor::zeros_like(h.value);
  const double keep = 1.0 / (1.0 - drop.rate);
  for (int i = 0; i < mask.size(); ++i) {
    const double u = u01(*drop.rng);
    mask[i] = u < drop.rate ? 0.0 : keep;
  }
  return mul(t, h, constant(std::move(mask)));
}

DiffValue mlp_trunk(Tape& t, const BoundModel& b, const char* prefix, DiffValue h,
                    int layers, const DropoutCtx& drop) {
  for (int l = 0; l < layers; ++l) {
    const std::string i = std::to_string(l);
    h = relu(t, add_row_vec(t, matmul(t, h, b[prefix + ("w" + i)]),
                            b[prefix + ("b" + i)]));
    h = apply_dropout(t, h, drop);
  }
  return h;
}

}  // namespace

DiffValue oracle_unary_forward(Tape& t, const BoundModel& b, const DiffValue& feats,
                               const DropoutCtx& drop) {
  DiffValue h = mlp_trunk(t, b, "u.", feats, b.model->config().hidden_layers, drop);
  return sigmoid(t, add_row_vec(t, matmul(t, h, b["u.wout"]), b["u.bout"]));
}

DiffValue oracle_relation_forward(Tape& t, const BoundModel& b, const DiffValue& feats,
                                  const DropoutCtx& drop) {
  DiffValue proj = add_row_vec(t, matmul(t, feats, b["r.proj"]), b["r.projb"]);
  DiffValue pairs = pair_concat(t, proj);
  DiffValue h = mlp_trunk(t, b, "r.", pairs, b.model->config().hidden_layers, drop);
  return sigmoid(t, add_row_vec(t, matmul(t, h, b["r.wout"]), b["r.bout"]));
}

NeuralOracle::NeuralOracle(Tape& tape, const BoundModel& bound,
                           const ConceptVocabulary& vocab, const Featurization& feats,
                           DropoutCtx drop)
    : tape_(tape), bound_(bound), vocab_(vocab), drop_(drop), n_(feats.size()) {
  if (feats.dim != bound.model->feature_dim())
    throw Error(ErrorKind::Shape, "featurization does not match the model's input width");
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(n_) * feats.dim);
  for (const auto& v : feats.vectors) flat.insert(flat.end(), v.begin(), v.end());
  feats_ = constant(Tensor::matrix(n_, feats.dim, std::move(flat)));
}

// A tracked forward writes nodes onto the construction tape, so its node ids
// are only meaningful there; constant-bound forwards fold off-tape and may be
// served to any caller.
void NeuralOracle::check_tape(const Tape& t) const {
  if (&t == &tape_) return;
  for (const DiffValue& v : bound_.values)
    if (v.tracked())
      throw Error(ErrorKind::Contract, "tracked oracle queried with a foreign tape");
}

DiffValue NeuralOracle::unary_attention(Tape& t, const std::string& token) {
  check_tape(t);
  if (!have_unary_) {
    unary_matrix_ = oracle_unary_forward(tape_, bound_, feats_, drop_);
    have_unary_ = true;
  }
  return col_of(tape_, unary_matrix_, vocab_.unary_index(token));
}

DiffValue NeuralOracle::relation_attention(Tape& t, const std::string& rel) {
  check_tape(t);
  if (!have_relation_) {
    relation_matrix_ = oracle_relation_forward(tape_, bound_, feats_, drop_);
    have_relation_ = true;
  }
  DiffValue col = col_of(tape_, relation_matrix_, vocab_.binary_index(rel));
  return reshape(tape_, col, 2, n_, n_);
}

namespace {

// Fisher-Yates with raw draws, so shuffles are pinned to the seed alone.
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

std::vector<int> epoch_pool(const Dataset& data, int cap) {
  std::vector<int> pool;
  for (size_t i = 0; i < data.questions.size(); ++i)
    if (cap == 0 || data.questions[i].length <= cap)
      pool.push_back(static_cast<int>(i));
  return pool;
}

}  // namespace

TrainStats train_oracle(OracleModel& model, const Dataset& data, const TrainConfig& cfg) {
  if (data.questions.empty())
    throw Error(ErrorKind::Training, "no questions to train on");
  if (cfg.batch_size <= 0 || cfg.epochs <= 0)
    throw Error(ErrorKind::Training, "batch size and epoch count must be positive");

  // Featurize every scene once; the corrupted features are a deterministic
  // function of (scene, corruption, seed) shared with inference.
  std::vector<Featurization> feats(data.scenes.size());
  for (size_t s = 0; s < data.scenes.size(); ++s)
    feats[s] = make_featurization(data.scenes[s], data.vocab, cfg.corruption,
                                  scene_stream_seed(cfg.seed, data.scene_ids[s]));

  std::vector<int> caps;
  for (const auto& [max_len, n] : cfg.curriculum)
    for (int e = 0; e < n && static_cast<int>(caps.size()) < cfg.epochs; ++e)
      caps.push_back(max_len);
  while (static_cast<int>(caps.size()) < cfg.epochs) caps.push_back(0);

  AdamConfig acfg;
  acfg.lr = cfg.lr;
  acfg.weight_decay = cfg.weight_decay;
  AdamState state;
  std::mt19937_64 order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 drop_rng(cfg.seed ^ 0x2545f4914f6cdd1dULL);
  const std::vector<Tensor*> tensors = model.param_tensors();

  TrainStats stats;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> pool = epoch_pool(data, caps[epoch]);
    if (pool.empty())
      throw Error(ErrorKind::Training, "curriculum stage admits no questions");
    std::vector<int> order = pool;
    shuffle_pinned(order, order_rng);

    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t stop = std::min(order.size(), start + cfg.batch_size);
      Tape tape;
      BoundModel bound = BoundModel::bind(tape, model, true);
      DiffValue batch_loss = constant(0.0);
      for (size_t k = start; k < stop; ++k) {
        const Question& q = data.questions[order[k]];
        const int s = data.scene_index.at(q.scene_id);
        NeuralOracle oracle(tape, bound, data.vocab, feats[s],
                            {&drop_rng, model.config().dropout});
        EngineOutput out = execute(q.compiled, oracle, tape, {ExecMode::Training, nullptr});
        batch_loss = add(tape, batch_loss, question_loss(tape, q, out));
      }
      batch_loss = div(tape, batch_loss, constant(static_cast<double>(stop - start)));
      const double lv = batch_loss.value.scalar_value();
      if (!std::isfinite(lv))
        throw Error(ErrorKind::Training,
                    "loss diverged at epoch " + std::to_string(epoch + 1) + ", batch " +
                        std::to_string(start / cfg.batch_size + 1));
      loss_sum += lv * static_cast<double>(stop - start);

      std::vector<Tensor> all = tape.backward(batch_loss);
      std::vector<Tensor> grads;
      grads.reserve(bound.values.size());
      for (const auto& v : bound.values) grads.push_back(std::move(all[v.id]));
      for (const auto& g : grads)
        for (double x : g.data)
          if (!std::isfinite(x))
            throw Error(ErrorKind::Training,
                        "gradient diverged at epoch " + std::to_string(epoch + 1));
      clip_global_norm(grads, cfg.clip_norm);
      adam_step(tensors, grads, state, acfg);
    }

    // Evaluation-mode pass over the same pool: constant parameters, no
    // dropout, exact products, answers thresholded like inference. Pool
    // order groups questions by scene, so scenes share one forward pass.
    int correct = 0;
    int cur_scene = -1;
    Tape etape;
    BoundModel ebound;
    std::unique_ptr<NeuralOracle> eoracle;
    for (int qi : pool) {
      const Question& q = data.questions[qi];
      const int s = data.scene_index.at(q.scene_id);
      if (s != cur_scene) {
        cur_scene = s;
        etape.clear();
        ebound = BoundModel::bind(etape, model, false);
        eoracle = std::make_unique<NeuralOracle>(etape, ebound, data.vocab, feats[s]);
      }
      Answer a = answer(q.compiled, *eoracle, cfg.theta);
      if (answer_correct(q, a.text)) ++correct;
    }

    EpochStat st;
    st.epoch = epoch + 1;
    st.length_cap = caps[epoch];
    st.questions = static_cast<int>(pool.size());
    st.loss = loss_sum / static_cast<double>(pool.size());
    st.accuracy = static_cast<double>(correct) / static_cast<double>(pool.size());
    stats.epochs.push_back(st);
  }
  return stats;
}

std::string loss_curve_csv(const TrainStats& stats) {
  std::ostringstream os;
  os << "epoch,length_cap,questions,loss,accuracy\n";
  for (const auto& e : stats.epochs) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.9g,%.9g\n", e.epoch, e.length_cap,
                  e.questions, e.loss, e.accuracy);
    os << buf;
  }
  return os.str();
}

}  // namespace nfol
