#include "nfol/calibration.hpp"

#include <cmath>

#include <json.hpp>

#include "nfol/error.hpp"
#include "nfol/vocab.hpp"

namespace nfol {

double softplus_inverse_one() {
  static const double cached = [] {
    double x = std::log(std::exp(1.0) - 1.0);
    for (int k = 0; k < 128; ++k) {
      double v = softplus_value(x);
      if (v == 1.0) return x;
      x = std::nextafter(x, v < 1.0 ? HUGE_VAL : -HUGE_VAL);
    }
    throw Error(ErrorKind::Numeric, "no exact softplus preimage of 1.0");
  }();
  return cached;
}

CalibParams CalibParams::identity() {
  CalibParams p;
  p.raw_a = p.raw_b = p.raw_d = softplus_inverse_one();
  p.raw_c = 0.0;  // logistic(0) == 0.5 exactly
  return p;
}

std::array<double, 4> CalibParams::constrained() const {
  return {softplus_value(raw_a), softplus_value(raw_b), sigmoid_value(raw_c),
          softplus_value(raw_d)};
}

double calibrate_value(double alpha, double a, double b, double c, double d) {
  const double num = c * std::pow(alpha, a);
  const double den = num + d * (1.0 - c) * std::pow(1.0 - alpha, b);
  return num / den;
}

DiffValue calibrate(Tape& t, const DiffValue& alpha, const DiffValue& a,
                    const DiffValue& b, const DiffValue& c, const DiffValue& d,
                    ExecMode mode) {
  DiffValue x = alpha;
  if (mode == ExecMode::Training) x = clamp(t, x, 1e-7, 1.0 - 1e-7);
  DiffValue one = constant(1.0);
  DiffValue num = mul(t, c, pow(t, x, a));
  DiffValue rest = mul(t, mul(t, d, sub(t, one, c)), pow(t, sub(t, one, x), b));
  return div(t, num, add(t, num, rest));
}

DiffValue calibrate_raw(Tape& t, const DiffValue& alpha, const DiffValue& raw_a,
                        const DiffValue& raw_b, const DiffValue& raw_c,
                        const DiffValue& raw_d, ExecMode mode) {
  return calibrate(t, alpha, softplus(t, raw_a), softplus(t, raw_b),
                   sigmoid(t, raw_c), softplus(t, raw_d), mode);
}

std::string ContextTable::make_key(const std::string& pred, int position) {
  return pred + "@" + std::to_string(position);
}

const CalibParams& ContextTable::lookup(const std::string& key) const {
  auto it = entries.find(key);
  return it == entries.end() ? defaults : it->second;
}

DiffValue ContextTable::apply(Tape& t, const std::string& key,
                              const DiffValue& alpha, ExecMode mode) const {
  const auto [a, b, c, d] = lookup(key).constrained();
  return calibrate(t, alpha, constant(a), constant(b), constant(c),
                   constant(d), mode);
}

namespace {

nlohmann::json params_to_json(const CalibParams& p) {
  return nlohmann::json::array({p.raw_a, p.raw_b, p.raw_c, p.raw_d});
}

CalibParams params_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4)
    throw Error(ErrorKind::Data, "calibration entry must be [raw_a, raw_b, raw_c, raw_d]");
  for (const auto& v : j) {
    if (!v.is_number())
      throw Error(ErrorKind::Data, "calibration parameters must be numbers");
  }
  CalibParams p;
  p.raw_a = j[0].get<double>();
  p.raw_b = j[1].get<double>();
  p.raw_c = j[2].get<double>();
  p.raw_d = j[3].get<double>();
  return p;
}

}  // namespace

std::string ContextTable::to_json_text() const {
  nlohmann::json j;
  j["vocab_hash"] = hex64(vocab_hash);
  j["default"] = params_to_json(defaults);
  nlohmann::json e = nlohmann::json::object();
  for (const auto& [key, p] : entries) e[key] = params_to_json(p);
  j["entries"] = e;
  return j.dump(2) + "\n";
}

ContextTable ContextTable::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Data, std::string("bad calibration json: ") + e.what());
  }
  if (!j.is_object() || !j.contains("default") || !j.contains("entries"))
    throw Error(ErrorKind::Data, "calibration json needs 'default' and 'entries'");
  ContextTable table;
  table.defaults = params_from_json(j["default"]);
  if (!j["entries"].is_object())
    throw Error(ErrorKind::Data, "'entries' must be an object");
  for (const auto& [key, v] : j["entries"].items())
    table.entries[key] = params_from_json(v);
  if (j.contains("vocab_hash")) {
    if (!j["vocab_hash"].is_string())
      throw Error(ErrorKind::Data, "'vocab_hash' must be a hex string");
    table.vocab_hash = std::stoull(j["vocab_hash"].get<std::string>(), nullptr, 16);
  }
  return table;
}

}  // namespace nfol
