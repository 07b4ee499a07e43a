#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include <nfol/harness.hpp>

#include "test_util.hpp"

using namespace nfol;

namespace {

GenConfig small_cfg() {
  GenConfig cfg;
  cfg.seed = 21;
  cfg.scenes = 40;
  cfg.questions_per_scene = 4;
  return cfg;
}

std::vector<AnswerRecord> gold_answers(const Dataset& d) {
  std::vector<AnswerRecord> out;
  for (const Question& q : d.questions) out.push_back({q.id, q.gold, 1.0});
  return out;
}

}  // namespace

TEST_CASE("generated datasets are structurally sound") {
  Dataset d = generate(small_cfg());
  CHECK(d.scenes.size() == 40);
  CHECK(d.questions.size() >= 160);

  std::set<std::string> ids;
  for (const Question& q : d.questions) {
    CHECK(ids.insert(q.id).second);
    CHECK(d.scene_index.count(q.scene_id) == 1);
    CHECK(q.program == parse_dsl(q.program_text));
    CHECK(q.length == q.program.length());
    CHECK(q.open == q.program.open());
    if (q.open) {
      CHECK_FALSE(q.gold.empty());
      CHECK(std::find(q.candidates.begin(), q.candidates.end(), q.gold) !=
            q.candidates.end());
      CHECK(q.candidates.size() == q.formulas.size());
    } else {
      CHECK((q.gold == "yes" || q.gold == "no"));
      CHECK(q.formulas.size() == 1);
    }
    for (const std::string& e : q.entails) CHECK(ids.count(e) == 1);  // children precede
  }
  for (const auto& [id, idx] : d.question_index) CHECK(d.questions[idx].id == id);
}

TEST_CASE("gold answers come from classical evaluation") {
  Dataset d = generate(small_cfg());
  for (const Question& q : d.questions) {
    const SceneGraph& sc = d.scene_of(q);
    if (!q.open) {
      CHECK(q.gold == (crisp_eval(*q.formulas[0], sc, d.vocab) ? "yes" : "no"));
    } else {
      std::string first;
      for (size_t i = 0; i < q.formulas.size(); ++i)
        if (crisp_eval(*q.formulas[i], sc, d.vocab)) {
          first = q.candidates[i];
          break;
        }
      CHECK(q.gold == first);
    }
  }
}

TEST_CASE("binary classes stay balanced and children are entailed truths") {
  Dataset d = generate(small_cfg());
  int yes = 0, no = 0;
  std::set<std::string> child_ids;
  for (const Question& q : d.questions)
    for (const std::string& e : q.entails) child_ids.insert(e);
  for (const Question& q : d.questions) {
    if (!q.open) (q.gold == "yes" ? yes : no)++;
    if (child_ids.count(q.id)) {
      CHECK_FALSE(q.open);
      CHECK(q.gold == "yes");
    }
  }
  int binary = yes + no;
  REQUIRE(binary > 0);
  CHECK(yes >= binary / 4);
  CHECK(no >= binary / 4);
  CHECK_FALSE(child_ids.empty());
}

TEST_CASE("generation is deterministic per seed") {
  Dataset a = generate(small_cfg());
  Dataset b = generate(small_cfg());
  REQUIRE(a.questions.size() == b.questions.size());
  for (size_t i = 0; i < a.questions.size(); ++i) {
    CHECK(a.questions[i].id == b.questions[i].id);
    CHECK(a.questions[i].program_text == b.questions[i].program_text);
    CHECK(a.questions[i].gold == b.questions[i].gold);
  }
  for (size_t i = 0; i < a.scenes.size(); ++i)
    CHECK(scene_to_json_text(a.scenes[i]) == scene_to_json_text(b.scenes[i]));

  GenConfig other = small_cfg();
  other.seed = 22;
  Dataset c = generate(other);
  bool same = c.questions.size() == a.questions.size();
  if (same)
    for (size_t i = 0; i < a.questions.size(); ++i)
      same = same && c.questions[i].program_text == a.questions[i].program_text;
  CHECK_FALSE(same);
}

TEST_CASE("random scenes obey the geometric relation rules") {
  ConceptVocabulary v = default_vocabulary();
  std::mt19937_64 rng(31);
  for (int round = 0; round < 200; ++round) {
    SceneGraph s = random_scene(v, rng, 2, 8);
    validate_scene(s, v);
    const int n = s.size();
    std::vector<double> cx(n), cy(n);
    std::vector<bool> large(n), small(n);
    for (int i = 0; i < n; ++i) {
      cx[i] = s.objects[i].bbox[0] + s.objects[i].bbox[2] / 2;
      cy[i] = s.objects[i].bbox[1] + s.objects[i].bbox[3] / 2;
      const auto& at = s.objects[i].attributes;
      large[i] = std::find(at.begin(), at.end(), "large") != at.end();
      small[i] = std::find(at.begin(), at.end(), "small") != at.end();
    }
    // centers recomputed from bbox corners drift by an ulp, so skip pairs
    // sitting exactly on a decision boundary
    const double eps = 1e-9;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double dx = cx[i] - cx[j];
        const double dy = cy[j] - cy[i];
        if (std::fabs(dx) > eps) {
          CHECK(s.has_relation(i, "left", j) == (cx[i] < cx[j]));
          CHECK(s.has_relation(i, "right", j) == (cx[i] > cx[j]));
        }
        if (std::fabs(std::fabs(dx) - 0.055) > eps && std::fabs(dy) > eps &&
            std::fabs(dy - 0.35) > eps)
          CHECK(s.has_relation(i, "on", j) ==
                (std::fabs(dx) <= 0.055 && dy > 0.0 && dy <= 0.35));
        const double dist = std::hypot(cx[i] - cx[j], cy[i] - cy[j]);
        if (std::fabs(dist - 0.25) > eps)
          CHECK(s.has_relation(i, "holding", j) ==
                (large[i] && small[j] && dist <= 0.25));
      }
  }
}

TEST_CASE("dataset save and load round trip") {
  Dataset d = generate(small_cfg());
  std::string dir = testutil::make_temp_dir();
  save_dataset(d, dir);
  Dataset back = load_dataset(dir);
  CHECK(back.vocab.hash() == d.vocab.hash());
  REQUIRE(back.questions.size() == d.questions.size());
  for (size_t i = 0; i < d.questions.size(); ++i) {
    CHECK(back.questions[i].id == d.questions[i].id);
    CHECK(back.questions[i].gold == d.questions[i].gold);
    CHECK(back.questions[i].program == d.questions[i].program);
    CHECK(back.questions[i].entails == d.questions[i].entails);
  }
  REQUIRE(back.scenes.size() == d.scenes.size());
  for (size_t i = 0; i < d.scenes.size(); ++i)
    CHECK(scene_to_json_text(back.scenes[i]) == scene_to_json_text(d.scenes[i]));

  // saving the loaded dataset reproduces the files byte for byte
  std::string dir2 = testutil::make_temp_dir();
  save_dataset(back, dir2);
  for (const char* f : {"/vocab.json", "/scenes.jsonl", "/questions.jsonl"})
    CHECK(testutil::slurp(dir + f) == testutil::slurp(dir2 + f));

  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("load rejects corrupt files") {
  Dataset d = generate(small_cfg());
  std::string dir = testutil::make_temp_dir();
  save_dataset(d, dir);

  std::string qs = testutil::slurp(dir + "/questions.jsonl");
  testutil::spit(dir + "/questions.jsonl", "{broken\n" + qs);
  CHECK_KIND(load_dataset(dir), ErrorKind::Data);
  testutil::spit(dir + "/questions.jsonl", qs);

  CHECK_NOTHROW(load_dataset(dir));
  std::filesystem::remove(dir + "/vocab.json");
  CHECK_KIND(load_dataset(dir), ErrorKind::Data);
  std::filesystem::remove_all(dir);
}

TEST_CASE("answers jsonl round trip") {
  std::vector<AnswerRecord> a = {{"q0", "yes", 0.93}, {"q1", "red", 0.5}};
  std::string text = answers_to_jsonl(a);
  std::vector<AnswerRecord> b = answers_from_jsonl(text);
  REQUIRE(b.size() == 2);
  CHECK(b[0].id == "q0");
  CHECK(b[0].answer == "yes");
  CHECK(b[0].likelihood == 0.93);
  CHECK(b[1].answer == "red");
  CHECK_KIND(answers_from_jsonl("{oops\n"), ErrorKind::Data);
}

TEST_CASE("consistency over entailed children") {
  Dataset d = generate(small_cfg());

  std::map<std::string, std::string> all_gold;
  for (const Question& q : d.questions) all_gold[q.id] = q.gold;
  ConsistencyResult full = consistency(d, all_gold);
  CHECK_FALSE(full.vacuous);
  CHECK(full.value == 1.0);

  // break every entailed child's answer; qualifying parents all drop to 0
  std::set<std::string> child_ids;
  for (const Question& q : d.questions)
    for (const std::string& e : q.entails) child_ids.insert(e);
  std::map<std::string, std::string> broken = all_gold;
  for (const std::string& c : child_ids) broken[c] = broken[c] == "yes" ? "no" : "yes";
  ConsistencyResult none = consistency(d, broken);
  CHECK_FALSE(none.vacuous);
  CHECK(none.value == 0.0);

  // a parent answered wrongly does not qualify; with every parent wrong the
  // metric is vacuous
  std::map<std::string, std::string> parents_wrong = all_gold;
  for (const Question& q : d.questions)
    if (!q.entails.empty()) parents_wrong[q.id] = q.open ? "yes" : (q.gold == "yes" ? "no" : "yes");
  ConsistencyResult vac = consistency(d, parents_wrong);
  CHECK(vac.vacuous);
  CHECK(vac.value == 1.0);
}

TEST_CASE("split membership follows base correctness") {
  Dataset d = generate(small_cfg());
  std::vector<AnswerRecord> base = gold_answers(d);
  // flip every fourth answer to something wrong
  std::set<std::string> wrong;
  for (size_t i = 0; i < base.size(); i += 4) {
    const Question& q = d.questions[d.question_index.at(base[i].id)];
    base[i].answer = q.open ? "not-a-token" : (q.gold == "yes" ? "no" : "yes");
    wrong.insert(base[i].id);
  }

  SplitReport s = make_split(d, base);
  CHECK(s.easy.size() + s.hard.size() == d.questions.size());
  for (const std::string& id : s.hard) CHECK(wrong.count(id) == 1);
  for (const std::string& id : s.easy) CHECK(wrong.count(id) == 0);

  std::string text = split_to_json_text(s);
  SplitReport back = split_from_json_text(text);
  CHECK(back.easy == s.easy);
  CHECK(back.hard == s.hard);
  CHECK(back.base_answers.size() == s.base_answers.size());
  CHECK_KIND(split_from_json_text("{bad"), ErrorKind::Data);

  // coverage errors
  std::vector<AnswerRecord> missing(base.begin(), base.end() - 1);
  CHECK_KIND(make_split(d, missing), ErrorKind::Data);
  std::vector<AnswerRecord> extra = base;
  extra.push_back({"q_unknown", "yes", 1.0});
  CHECK_KIND(make_split(d, extra), ErrorKind::Data);
}

TEST_CASE("reasoning scores on hand-crafted answers") {
  Dataset d = generate(small_cfg());
  std::vector<AnswerRecord> base = gold_answers(d);

  ScoreReport perfect = reasoning_scores(d, base, nullptr, {{"run", "t"}});
  CHECK(perfect.all.count == static_cast<int>(d.questions.size()));
  CHECK(perfect.open.count + perfect.binary.count == perfect.all.count);
  CHECK(perfect.all.accuracy == 1.0);
  CHECK(perfect.open.accuracy == 1.0);
  CHECK(perfect.binary.accuracy == 1.0);
  CHECK(perfect.all.consistency == 1.0);
  CHECK(perfect.meta.at("run") == "t");
  CHECK_FALSE(perfect.all.acc_h.has_value());  // no split given

  // against its own split: err_e = 0 exactly and acc_h = 0 exactly
  std::vector<AnswerRecord> flawed = base;
  for (size_t i = 0; i < flawed.size(); i += 3) {
    const Question& q = d.questions[d.question_index.at(flawed[i].id)];
    flawed[i].answer = q.open ? "not-a-token" : (q.gold == "yes" ? "no" : "yes");
  }
  SplitReport split = make_split(d, flawed);
  REQUIRE(split.hard.size() > 0);
  REQUIRE(split.easy.size() > 0);
  ScoreReport own = reasoning_scores(d, flawed, &split, {});
  CHECK(own.all.acc_h.value() == 0.0);
  CHECK(own.all.err_e.value() == 0.0);
  CHECK(own.all.hard_count == static_cast<int>(split.hard.size()));
  CHECK(own.all.easy_count == static_cast<int>(split.easy.size()));

  // gold answers against the flawed split recover every hard question
  ScoreReport fixed = reasoning_scores(d, base, &split, {});
  CHECK(fixed.all.acc_h.value() == 1.0);
  CHECK(fixed.all.err_e.value() == 0.0);

  std::string json = report_to_json_text(fixed);
  CHECK(json.find("\"acc_h\"") != std::string::npos);

  // coverage errors mirror the split checks
  std::vector<AnswerRecord> missing(base.begin(), base.end() - 1);
  CHECK_KIND(reasoning_scores(d, missing, nullptr, {}), ErrorKind::Data);
}

TEST_CASE("answer_correct is exact token equality") {
  Dataset d = generate(small_cfg());
  const Question& q = d.questions[0];
  CHECK(answer_correct(q, q.gold));
  CHECK_FALSE(answer_correct(q, q.gold + "x"));
}
