#include "nfol/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nfol/error.hpp"
#include "nfol/fol.hpp"

namespace nfol {

namespace {

size_t pick(std::mt19937_64& rng, size_t k) { return rng() % k; }
bool coin(std::mt19937_64& rng) { return (rng() & 1) != 0; }

template <typename T>
const T& choice(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[pick(rng, v.size())];
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Data, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Data, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorKind::Data, "short write to " + path);
}

}  // namespace

const SceneGraph& Dataset::scene_of(const Question& q) const {
  auto it = scene_index.find(q.scene_id);
  if (it == scene_index.end())
    throw Error(ErrorKind::Data, "question " + q.id + " references unknown scene " + q.scene_id);
  return scenes[it->second];
}

// ----------------------------------------------------------------- scenes --

SceneGraph random_scene(const ConceptVocabulary& vocab, std::mt19937_64& rng,
                        int min_objects, int max_objects) {
  if (min_objects < 1 || max_objects < min_objects)
    throw Error(ErrorKind::Contract, "object count bounds must satisfy 1 <= min <= max");
  if (!vocab.has_category("name"))
    throw Error(ErrorKind::Data, "GSelect template needs a 'name' category");
  const auto& names = vocab.concepts_of("name");

  // Horizontal positions come from a fixed grid of distinct slots so the
  // left/right relations are never ambiguous and 'on' pairs need adjacency.
  constexpr int kSlots = 19;
  if (max_objects > kSlots)
    throw Error(ErrorKind::Data, "object count exceeds the position grid");
  const int n = min_objects + static_cast<int>(pick(rng, max_objects - min_objects + 1));
  std::vector<int> slots(kSlots);
  for (int i = 0; i < kSlots; ++i) slots[i] = i;
  for (int i = 0; i < n; ++i) {
    const int j = i + static_cast<int>(pick(rng, kSlots - i));
    std::swap(slots[i], slots[j]);
  }

  SceneGraph scene;
  std::vector<double> cx(n), cy(n);
  for (int i = 0; i < n; ++i) {
    SceneObject o;
    o.id = i;
    o.name = choice(names, rng);
    for (const auto& cat : vocab.category_names()) {
      if (cat == "name") continue;
      o.attributes.push_back(choice(vocab.concepts_of(cat), rng));
    }
    cx[i] = 0.05 + 0.05 * slots[i];
    cy[i] = 0.1 + 0.1 * static_cast<double>(pick(rng, 9));
    const bool large = std::find(o.attributes.begin(), o.attributes.end(), "large") !=
                       o.attributes.end();
    const double wh = large ? 0.10 : 0.06;
    o.bbox = {cx[i] - wh / 2, cy[i] - wh / 2, wh, wh};
    scene.objects.push_back(std::move(o));
  }

  auto has_attr = [&](int i, const char* a) {
    const auto& at = scene.objects[i].attributes;
    return std::find(at.begin(), at.end(), a) != at.end();
  };
  // Relations are a deterministic function of geometry and size, so a model
  // reading features can in principle recover every one of them.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (vocab.has_binary("left") && cx[i] < cx[j])
        scene.relations.emplace_back(i, "left", j);
      if (vocab.has_binary("right") && cx[i] > cx[j])
        scene.relations.emplace_back(i, "right", j);
      if (vocab.has_binary("on") && std::fabs(cx[i] - cx[j]) <= 0.055 &&
          cy[j] - cy[i] > 0.0 && cy[j] - cy[i] <= 0.35)
        scene.relations.emplace_back(i, "on", j);
      if (vocab.has_binary("holding") && has_attr(i, "large") && has_attr(j, "small") &&
          std::hypot(cx[i] - cx[j], cy[i] - cy[j]) <= 0.25)
        scene.relations.emplace_back(i, "holding", j);
    }
  return scene;
}

// -------------------------------------------------------------- questions --

namespace {

DslStep st(DslOpKind op, std::vector<std::string> args, std::vector<int> inputs) {
  DslStep s;
  s.op = op;
  s.args = std::move(args);
  s.inputs = std::move(inputs);
  return s;
}

Question build_question(std::string id, std::string scene_id, const DslProgram& p,
                        const ConceptVocabulary& vocab) {
  Question q;
  q.id = std::move(id);
  q.scene_id = std::move(scene_id);
  q.program_text = print_dsl(p);
  q.program = parse_dsl(q.program_text);
  check_against_vocab(q.program, vocab);
  q.compiled = compile_dsl(q.program, vocab);
  q.formulas = to_formulas(q.program, vocab);
  q.candidates = candidate_tokens(q.program, vocab);
  q.open = q.program.open();
  q.length = q.program.length();
  return q;
}

// Gold answer by classical evaluation; open questions take the first true
// candidate (matching the engine's lowest-index tie rule), empty if none.
std::string crisp_gold(const Question& q, const SceneGraph& scene,
                       const ConceptVocabulary& vocab) {
  if (!q.open) return crisp_eval(*q.formulas[0], scene, vocab) ? "yes" : "no";
  for (size_t i = 0; i < q.formulas.size(); ++i)
    if (crisp_eval(*q.formulas[i], scene, vocab)) return q.candidates[i];
  return {};
}

struct Triple {
  int s;
  std::string rel;
  int o;
};

class Generator {
 public:
  explicit Generator(const GenConfig& cfg)
      : cfg_(cfg), vocab_(default_vocabulary()), rng_(cfg.seed) {
    if (cfg.scenes < 1 || cfg.questions_per_scene < 1)
      throw Error(ErrorKind::Contract, "scene and question counts must be positive");
    for (const auto& cat : vocab_.category_names()) {
      if (cat == "name") continue;
      attr_cats_.push_back(cat);
      if (vocab_.concepts_of(cat).size() >= 2) multi_cats_.push_back(cat);
    }
    if (vocab_.concepts_of("name").empty())
      throw Error(ErrorKind::Data, "GSelect template needs at least one name");
    if (attr_cats_.empty())
      throw Error(ErrorKind::Data, "GFilter template needs an attribute category");
    if (multi_cats_.empty())
      throw Error(ErrorKind::Data,
                  "GChooseAttr template needs a category with at least two concepts");
    if (vocab_.binary_count() < 1)
      throw Error(ErrorKind::Data, "GRelate template needs a binary relation");
    if (vocab_.binary_count() < 2)
      throw Error(ErrorKind::Data, "GChooseRel template needs two distinct relations");
  }

  Dataset run() {
    Dataset d;
    d.vocab = vocab_;
    for (int s = 0; s < cfg_.scenes; ++s) {
      const std::string sid = "s" + std::to_string(s);
      SceneGraph scene = random_scene(vocab_, rng_, cfg_.min_objects, cfg_.max_objects);
      d.scene_index[sid] = static_cast<int>(d.scenes.size());
      d.scene_ids.push_back(sid);
      d.scenes.push_back(std::move(scene));
      for (int k = 0; k < cfg_.questions_per_scene; ++k)
        emit_question(d, sid, d.scenes.back());
    }
    for (size_t i = 0; i < d.questions.size(); ++i)
      d.question_index[d.questions[i].id] = static_cast<int>(i);
    return d;
  }

 private:
  GenConfig cfg_;
  ConceptVocabulary vocab_;
  std::mt19937_64 rng_;
  std::vector<std::string> attr_cats_;
  std::vector<std::string> multi_cats_;
  int next_id_ = 0;
  int bin_yes_ = 0;
  int bin_no_ = 0;

  std::string fresh_id() { return "q" + std::to_string(next_id_++); }

  const SceneObject& rnd_obj(const SceneGraph& sc) {
    return sc.objects[pick(rng_, sc.objects.size())];
  }
  std::string rnd_name() { return choice(vocab_.concepts_of("name"), rng_); }
  std::string rnd_attr() {
    const auto& cat = choice(attr_cats_, rng_);
    return choice(vocab_.concepts_of(cat), rng_);
  }
  std::string attr_of(const SceneObject& o, const std::string& cat) {
    for (const auto& a : o.attributes)
      if (vocab_.category_of(a) == cat) return a;
    return {};
  }
  std::string any_cat() {
    const auto& cats = vocab_.category_names();
    return cats[pick(rng_, cats.size())];
  }

  // Uniform over relation types present, then uniform over that type's
  // triples, so sparse relations get asked about as often as dense ones.
  bool rnd_triple(const SceneGraph& sc, Triple& out) {
    if (sc.relations.empty()) return false;
    std::vector<std::string> kinds;
    for (const auto& [s, r, o] : sc.relations)
      if (std::find(kinds.begin(), kinds.end(), r) == kinds.end()) kinds.push_back(r);
    const std::string& kind = choice(kinds, rng_);
    std::vector<Triple> of_kind;
    for (const auto& [s, r, o] : sc.relations)
      if (r == kind) of_kind.push_back({s, r, o});
    out = of_kind[pick(rng_, of_kind.size())];
    return true;
  }

  // One template draw. want_yes biases binary templates toward scene-grounded
  // witnesses; the gold is always recomputed by the crisp checker afterwards.
  DslProgram draft(int tmpl, const SceneGraph& sc, bool want_yes) {
    const char* kSubject = "subject";
    const char* kObject = "object";
    switch (tmpl) {
      case 1: {
        const std::string n = want_yes ? rnd_obj(sc).name : rnd_name();
        return {{st(DslOpKind::GSelect, {n}, {}), st(DslOpKind::GExists, {}, {0})}};
      }
      case 2: {
        if (want_yes) {
          const SceneObject& o = rnd_obj(sc);
          const std::string a = attr_of(o, choice(attr_cats_, rng_));
          return {{st(DslOpKind::GSelect, {o.name}, {}), st(DslOpKind::GFilter, {a}, {0}),
                   st(DslOpKind::GExists, {}, {1})}};
        }
        return {{st(DslOpKind::GSelect, {rnd_name()}, {}),
                 st(DslOpKind::GFilter, {rnd_attr()}, {0}), st(DslOpKind::GExists, {}, {1})}};
      }
      case 3: {
        if (want_yes) {
          const SceneObject& o = rnd_obj(sc);
          const std::string a = attr_of(o, choice(attr_cats_, rng_));
          return {{st(DslOpKind::GSelect, {o.name}, {}),
                   st(DslOpKind::GVerifyAttr, {a}, {0})}};
        }
        return {{st(DslOpKind::GSelect, {rnd_name()}, {}),
                 st(DslOpKind::GVerifyAttr, {rnd_attr()}, {0})}};
      }
      case 4:
      case 5: {
        std::string n, m, r, role;
        Triple tr;
        if (want_yes && rnd_triple(sc, tr)) {
          r = tr.rel;
          if (coin(rng_)) {
            role = kSubject;
            n = sc.objects[tr.s].name;
            m = sc.objects[tr.o].name;
          } else {
            role = kObject;
            n = sc.objects[tr.o].name;
            m = sc.objects[tr.s].name;
          }
        } else {
          n = rnd_name();
          m = rnd_name();
          r = choice(vocab_.binary_relations(), rng_);
          role = coin(rng_) ? kSubject : kObject;
        }
        if (tmpl == 4)
          return {{st(DslOpKind::GSelect, {n}, {}), st(DslOpKind::GRelate, {m, r, role}, {0}),
                   st(DslOpKind::GExists, {}, {1})}};
        return {{st(DslOpKind::GSelect, {n}, {}),
                 st(DslOpKind::GVerifyRel, {m, r, role}, {0})}};
      }
      case 6: {
        const std::string n = rnd_obj(sc).name;
        return {{st(DslOpKind::GSelect, {n}, {}), st(DslOpKind::GQuery, {any_cat()}, {0})}};
      }
      case 7: {
        const SceneObject& o = rnd_obj(sc);
        const std::string cat = choice(multi_cats_, rng_);
        const std::string a1 = attr_of(o, cat);
        const auto& pool = vocab_.concepts_of(cat);
        std::string a2 = a1;
        while (a2 == a1) a2 = choice(pool, rng_);
        const bool swap = coin(rng_);
        return {{st(DslOpKind::GSelect, {o.name}, {}),
                 st(DslOpKind::GChooseAttr, {swap ? a2 : a1, swap ? a1 : a2}, {0})}};
      }
      case 8: {
        std::string n, m, r1, role;
        Triple tr;
        if (rnd_triple(sc, tr)) {
          r1 = tr.rel;
          if (coin(rng_)) {
            role = kSubject;
            n = sc.objects[tr.s].name;
            m = sc.objects[tr.o].name;
          } else {
            role = kObject;
            n = sc.objects[tr.o].name;
            m = sc.objects[tr.s].name;
          }
        } else {
          n = rnd_name();
          m = rnd_name();
          r1 = choice(vocab_.binary_relations(), rng_);
          role = coin(rng_) ? kSubject : kObject;
        }
        std::string r2 = r1;
        while (r2 == r1) r2 = choice(vocab_.binary_relations(), rng_);
        const bool swap = coin(rng_);
        return {{st(DslOpKind::GSelect, {n}, {}),
                 st(DslOpKind::GChooseRel, {m, swap ? r2 : r1, swap ? r1 : r2, role}, {0})}};
      }
      case 9:
      case 10: {
        std::string n, m;
        if (want_yes) {
          n = rnd_obj(sc).name;
          m = tmpl == 9 ? rnd_obj(sc).name : rnd_name();
        } else {
          n = rnd_name();
          m = rnd_name();
        }
        return {{st(DslOpKind::GSelect, {n}, {}), st(DslOpKind::GExists, {}, {0}),
                 st(DslOpKind::GSelect, {m}, {}), st(DslOpKind::GExists, {}, {2}),
                 st(tmpl == 9 ? DslOpKind::GAnd : DslOpKind::GOr, {}, {1, 3})}};
      }
      case 11:
      case 12: {
        const std::string cat = choice(attr_cats_, rng_);
        std::string n, m;
        const SceneObject& a = rnd_obj(sc);
        const SceneObject& b = rnd_obj(sc);
        const bool same = attr_of(a, cat) == attr_of(b, cat);
        const bool want_same = want_yes == (tmpl == 11);
        if (same == want_same) {
          n = a.name;
          m = b.name;
        } else if (want_yes && tmpl == 11) {
          n = m = a.name;  // an object always shares its own attribute
        } else {
          n = rnd_name();
          m = rnd_name();
        }
        return {{st(DslOpKind::GSelect, {n}, {}), st(DslOpKind::GSelect, {m}, {}),
                 st(tmpl == 11 ? DslOpKind::GTwoSame : DslOpKind::GTwoDifferent, {cat},
                    {0, 1})}};
      }
      case 13: {
        const std::string n = rnd_obj(sc).name;
        return {{st(DslOpKind::GSelect, {n}, {}),
                 st(DslOpKind::GAllSame, {choice(attr_cats_, rng_)}, {0})}};
      }
      case 14: {
        std::string n, a, m, r, role;
        Triple tr;
        if (want_yes && rnd_triple(sc, tr)) {
          r = tr.rel;
          if (coin(rng_)) {
            role = kSubject;
            n = sc.objects[tr.s].name;
            a = attr_of(sc.objects[tr.s], choice(attr_cats_, rng_));
            m = sc.objects[tr.o].name;
          } else {
            role = kObject;
            n = sc.objects[tr.o].name;
            a = attr_of(sc.objects[tr.o], choice(attr_cats_, rng_));
            m = sc.objects[tr.s].name;
          }
        } else {
          n = rnd_name();
          a = rnd_attr();
          m = rnd_name();
          r = choice(vocab_.binary_relations(), rng_);
          role = coin(rng_) ? kSubject : kObject;
        }
        return {{st(DslOpKind::GSelect, {n}, {}), st(DslOpKind::GFilter, {a}, {0}),
                 st(DslOpKind::GRelate, {m, r, role}, {1}), st(DslOpKind::GExists, {}, {2})}};
      }
      default: {  // 15
        std::string n, m, r, role;
        Triple tr;
        if (rnd_triple(sc, tr)) {
          r = tr.rel;
          if (coin(rng_)) {
            role = kSubject;
            n = sc.objects[tr.s].name;
            m = sc.objects[tr.o].name;
          } else {
            role = kObject;
            n = sc.objects[tr.o].name;
            m = sc.objects[tr.s].name;
          }
        } else {
          n = rnd_name();
          m = rnd_name();
          r = choice(vocab_.binary_relations(), rng_);
          role = coin(rng_) ? kSubject : kObject;
        }
        return {{st(DslOpKind::GSelect, {n}, {}), st(DslOpKind::GRelate, {m, r, role}, {0}),
                 st(DslOpKind::GQuery, {any_cat()}, {1})}};
      }
    }
  }

  // Shorter statements a correct parent answer logically commits the model
  // to; each becomes its own question listed in the parent's entailment set.
  std::vector<DslProgram> children_of(int tmpl, const Question& parent) {
    const auto& steps = parent.program.steps;
    std::vector<DslProgram> out;
    auto exists_of = [](const std::string& name) {
      return DslProgram{{st(DslOpKind::GSelect, {name}, {}), st(DslOpKind::GExists, {}, {0})}};
    };
    if (parent.open) {
      DslProgram p = parent.program;
      DslStep& last = p.steps.back();
      switch (tmpl) {
        case 6:
        case 15:
          last = st(DslOpKind::GVerifyAttr, {parent.gold}, last.inputs);
          break;
        case 7:
          last = st(DslOpKind::GVerifyAttr, {parent.gold}, last.inputs);
          break;
        default:  // 8
          last = st(DslOpKind::GVerifyRel, {last.args[0], parent.gold, last.args[3]},
                    last.inputs);
          break;
      }
      out.push_back(std::move(p));
      return out;
    }
    if (parent.gold != "yes") return out;
    switch (tmpl) {
      case 2:
      case 3:
        out.push_back(exists_of(steps[0].args[0]));
        break;
      case 4:
        out.push_back(exists_of(steps[1].args[0]));
        out.push_back(exists_of(steps[0].args[0]));
        break;
      case 5:
        out.push_back(exists_of(steps[1].args[0]));
        out.push_back(exists_of(steps[0].args[0]));
        break;
      case 9:
        out.push_back(exists_of(steps[0].args[0]));
        out.push_back(exists_of(steps[2].args[0]));
        break;
      case 14: {
        DslProgram filtered{{steps[0], steps[1], st(DslOpKind::GExists, {}, {1})}};
        out.push_back(std::move(filtered));
        out.push_back(exists_of(steps[2].args[0]));
        break;
      }
      default:
        break;
    }
    return out;
  }

  void emit_question(Dataset& d, const std::string& sid, const SceneGraph& sc) {
    constexpr int kRetries = 12;
    int tmpl = 1 + static_cast<int>(pick(rng_, 15));
    const bool want_yes = bin_yes_ <= bin_no_;

    Question q;
    for (int attempt = 0;; ++attempt) {
      DslProgram p = draft(tmpl, sc, want_yes);
      q = build_question(fresh_id(), sid, p, vocab_);
      q.gold = crisp_gold(q, sc, vocab_);
      if (q.open && q.gold.empty()) {
        if (attempt < kRetries) {
          --next_id_;
          continue;  // no true candidate; resample
        }
        --next_id_;
        tmpl = 1;  // give up on the open draw, fall back to plain existence
        continue;
      }
      if (!q.open && attempt < kRetries && (q.gold == "yes") != want_yes) {
        --next_id_;
        continue;
      }
      break;
    }

    for (DslProgram& cp : children_of(tmpl, q)) {
      Question c = build_question(fresh_id(), q.scene_id, cp, vocab_);
      c.gold = crisp_gold(c, sc, vocab_);
      q.entails.push_back(c.id);
      if (!c.open) (c.gold == "yes" ? bin_yes_ : bin_no_)++;
      d.questions.push_back(std::move(c));
    }
    if (!q.open) (q.gold == "yes" ? bin_yes_ : bin_no_)++;
    d.questions.push_back(std::move(q));
  }
};

}  // namespace

Dataset generate(const GenConfig& cfg) { return Generator(cfg).run(); }

// --------------------------------------------------------------------- io --

void save_dataset(const Dataset& d, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir + "/vocab.json", d.vocab.to_json_text());

  std::ostringstream scenes;
  for (size_t i = 0; i < d.scenes.size(); ++i) {
    nlohmann::json line;
    line["id"] = d.scene_ids[i];
    line["scene"] = nlohmann::json::parse(scene_to_json_text(d.scenes[i]));
    scenes << line.dump() << "\n";
  }
  write_text_file(dir + "/scenes.jsonl", scenes.str());

  std::ostringstream questions;
  for (const Question& q : d.questions) {
    nlohmann::json line;
    line["id"] = q.id;
    line["scene"] = q.scene_id;
    line["gold"] = q.gold;
    line["entails"] = q.entails;
    line["program"] = q.program_text;
    questions << line.dump() << "\n";
  }
  write_text_file(dir + "/questions.jsonl", questions.str());
}

namespace {

// Applies fn to each non-empty line, reporting the 1-based line number in
// errors.
void for_jsonl(const std::string& path, const std::string& text,
               const std::function<void(int, const nlohmann::json&)>& fn) {
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Data,
                  path + " line " + std::to_string(no) + ": " + e.what());
    }
    try {
      fn(no, j);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Data,
                  path + " line " + std::to_string(no) + ": " + e.what());
    }
  }
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
  Dataset d;
  d.vocab = ConceptVocabulary::from_json_text(read_text_file(dir + "/vocab.json"));

  for_jsonl("scenes.jsonl", read_text_file(dir + "/scenes.jsonl"),
            [&](int, const nlohmann::json& j) {
              const std::string id = j.at("id").get<std::string>();
              if (d.scene_index.count(id))
                throw Error(ErrorKind::Data, "duplicate scene id " + id);
              SceneGraph sc = scene_from_json_text(j.at("scene").dump());
              validate_scene(sc, d.vocab);
              d.scene_index[id] = static_cast<int>(d.scenes.size());
              d.scene_ids.push_back(id);
              d.scenes.push_back(std::move(sc));
            });

  for_jsonl("questions.jsonl", read_text_file(dir + "/questions.jsonl"),
            [&](int no, const nlohmann::json& j) {
              Question q = build_question(j.at("id").get<std::string>(),
                                          j.at("scene").get<std::string>(),
                                          parse_dsl(j.at("program").get<std::string>()),
                                          d.vocab);
              q.gold = j.at("gold").get<std::string>();
              q.entails = j.at("entails").get<std::vector<std::string>>();
              if (!d.scene_index.count(q.scene_id))
                throw Error(ErrorKind::Data, "questions.jsonl line " + std::to_string(no) +
                                                 ": unknown scene " + q.scene_id);
              if (d.question_index.count(q.id))
                throw Error(ErrorKind::Data, "questions.jsonl line " + std::to_string(no) +
                                                 ": duplicate question id " + q.id);
              d.question_index[q.id] = static_cast<int>(d.questions.size());
              d.questions.push_back(std::move(q));
            });

  for (const Question& q : d.questions)
    for (const std::string& e : q.entails)
      if (!d.question_index.count(e))
        throw Error(ErrorKind::Data,
                    "question " + q.id + " entails unknown question " + e);
  return d;
}

std::string answers_to_jsonl(const std::vector<AnswerRecord>& answers) {
  std::ostringstream os;
  for (const AnswerRecord& a : answers) {
    nlohmann::json j;
    j["id"] = a.id;
    j["answer"] = a.answer;
    j["likelihood"] = a.likelihood;
    os << j.dump() << "\n";
  }
  return os.str();
}

std::vector<AnswerRecord> answers_from_jsonl(const std::string& text) {
  std::vector<AnswerRecord> out;
  for_jsonl("answers", text, [&](int, const nlohmann::json& j) {
    AnswerRecord a;
    a.id = j.at("id").get<std::string>();
    a.answer = j.at("answer").get<std::string>();
    a.likelihood = j.at("likelihood").get<double>();
    out.push_back(std::move(a));
  });
  return out;
}

// ---------------------------------------------------------------- metrics --

bool answer_correct(const Question& q, const std::string& answer) {
  return q.gold == answer;
}

namespace {

const std::string& answer_for(const std::map<std::string, std::string>& by_id,
                              const std::string& id) {
  auto it = by_id.find(id);
  if (it == by_id.end())
    throw Error(ErrorKind::Data, "no answer for question " + id);
  return it->second;
}

}  // namespace

ConsistencyResult consistency(const Dataset& d,
                              const std::map<std::string, std::string>& answer_by_id) {
  double sum = 0.0;
  int groups = 0;
  for (const Question& q : d.questions) {
    if (q.entails.empty()) continue;
    if (!answer_correct(q, answer_for(answer_by_id, q.id))) continue;
    int ok = 0;
    for (const std::string& e : q.entails) {
      auto it = d.question_index.find(e);
      if (it == d.question_index.end())
        throw Error(ErrorKind::Data, "question " + q.id + " entails unknown question " + e);
      const Question& child = d.questions[it->second];
      if (answer_correct(child, answer_for(answer_by_id, e))) ++ok;
    }
    sum += static_cast<double>(ok) / static_cast<double>(q.entails.size());
    ++groups;
  }
  if (groups == 0) return {1.0, true};
  return {sum / groups, false};
}

SplitReport make_split(const Dataset& d, const std::vector<AnswerRecord>& base) {
  std::map<std::string, AnswerRecord> by_id;
  for (const AnswerRecord& a : base) {
    if (!d.question_index.count(a.id))
      throw Error(ErrorKind::Data, "answer for unknown question " + a.id);
    by_id[a.id] = a;
  }
  SplitReport s;
  for (const Question& q : d.questions) {
    auto it = by_id.find(q.id);
    if (it == by_id.end())
      throw Error(ErrorKind::Data, "no base answer for question " + q.id);
    (answer_correct(q, it->second.answer) ? s.easy : s.hard).push_back(q.id);
  }
  s.base_answers = std::move(by_id);
  return s;
}

std::string split_to_json_text(const SplitReport& s) {
  nlohmann::json j;
  j["easy"] = s.easy;
  j["hard"] = s.hard;
  nlohmann::json base = nlohmann::json::object();
  for (const auto& [id, a] : s.base_answers)
    base[id] = {{"answer", a.answer}, {"likelihood", a.likelihood}};
  j["base_answers"] = std::move(base);
  j["meta"] = s.meta;
  return j.dump(2) + "\n";
}

SplitReport split_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Data, std::string("split json: ") + e.what());
  }
  SplitReport s;
  try {
    s.easy = j.at("easy").get<std::vector<std::string>>();
    s.hard = j.at("hard").get<std::vector<std::string>>();
    for (const auto& [id, ja] : j.at("base_answers").items()) {
      AnswerRecord a;
      a.id = id;
      a.answer = ja.at("answer").get<std::string>();
      a.likelihood = ja.at("likelihood").get<double>();
      s.base_answers[id] = std::move(a);
    }
    if (j.contains("meta"))
      s.meta = j.at("meta").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Data, std::string("split json: ") + e.what());
  }
  return s;
}

namespace {

ScoreRow score_row(const Dataset& d, const std::map<std::string, std::string>& by_id,
                   const SplitReport* split, bool open_only, bool binary_only) {
  ScoreRow row;
  std::map<std::string, bool> in_hard;
  if (split) {
    for (const auto& id : split->hard) in_hard[id] = true;
    for (const auto& id : split->easy) in_hard[id] = false;
  }
  int correct = 0, hard_correct = 0, easy_wrong = 0;
  double cons_sum = 0.0;
  int cons_groups = 0;
  for (const Question& q : d.questions) {
    if (open_only && !q.open) continue;
    if (binary_only && q.open) continue;
    ++row.count;
    const bool ok = answer_correct(q, answer_for(by_id, q.id));
    if (ok) ++correct;
    if (!q.entails.empty() && ok) {
      int child_ok = 0;
      for (const std::string& e : q.entails) {
        const Question& child = d.questions[d.question_index.at(e)];
        if (answer_correct(child, answer_for(by_id, e))) ++child_ok;
      }
      cons_sum += static_cast<double>(child_ok) / static_cast<double>(q.entails.size());
      ++cons_groups;
    }
    if (split) {
      auto it = in_hard.find(q.id);
      if (it == in_hard.end())
        throw Error(ErrorKind::Data, "split does not cover question " + q.id);
      if (it->second) {
        ++row.hard_count;
        if (ok) ++hard_correct;
      } else {
        ++row.easy_count;
        if (!ok) ++easy_wrong;
      }
    }
  }
  if (row.count > 0) row.accuracy = static_cast<double>(correct) / row.count;
  if (cons_groups > 0) {
    row.consistency = cons_sum / cons_groups;
  } else {
    row.consistency = 1.0;
    row.consistency_vacuous = true;
  }
  if (split && row.hard_count > 0)
    row.acc_h = static_cast<double>(hard_correct) / row.hard_count;
  if (split && row.easy_count > 0)
    row.err_e = static_cast<double>(easy_wrong) / row.easy_count;
  return row;
}

nlohmann::json row_to_json(const ScoreRow& r) {
  nlohmann::json j;
  j["count"] = r.count;
  j["accuracy"] = r.accuracy ? nlohmann::json(*r.accuracy) : nlohmann::json(nullptr);
  j["consistency"] = r.consistency ? nlohmann::json(*r.consistency) : nlohmann::json(nullptr);
  j["consistency_vacuous"] = r.consistency_vacuous;
  j["acc_h"] = r.acc_h ? nlohmann::json(*r.acc_h) : nlohmann::json(nullptr);
  j["err_e"] = r.err_e ? nlohmann::json(*r.err_e) : nlohmann::json(nullptr);
  j["hard_count"] = r.hard_count;
  j["easy_count"] = r.easy_count;
  return j;
}

}  // namespace

ScoreReport reasoning_scores(const Dataset& d, const std::vector<AnswerRecord>& answers,
                             const SplitReport* split,
                             std::map<std::string, std::string> meta) {
  std::map<std::string, std::string> by_id;
  for (const AnswerRecord& a : answers) {
    if (!d.question_index.count(a.id))
      throw Error(ErrorKind::Data, "answer for unknown question " + a.id);
    by_id[a.id] = a.answer;
  }
  for (const Question& q : d.questions)
    if (!by_id.count(q.id))
      throw Error(ErrorKind::Data, "no answer for question " + q.id);

  ScoreReport r;
  r.open = score_row(d, by_id, split, true, false);
  r.binary = score_row(d, by_id, split, false, true);
  r.all = score_row(d, by_id, split, false, false);
  r.meta = std::move(meta);
  return r;
}

std::string report_to_json_text(const ScoreReport& r) {
  nlohmann::json j;
  j["open"] = row_to_json(r.open);
  j["binary"] = row_to_json(r.binary);
  j["all"] = row_to_json(r.all);
  j["meta"] = r.meta;
  return j.dump(2) + "\n";
}

}  // namespace nfol
