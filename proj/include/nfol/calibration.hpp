#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>

#include "nfol/autodiff.hpp"

namespace nfol {

// Four-parameter attention recalibration curve
//
//   C(alpha) = c * alpha^a / (c * alpha^a + d * (1 - c) * (1 - alpha)^b)
//
// with a, b, d > 0 and c in (0, 1). Parameters are stored unconstrained:
// a = softplus(raw_a), b = softplus(raw_b), c = logistic(raw_c),
// d = softplus(raw_d), so gradient descent never leaves the valid region.
struct CalibParams {
  double raw_a = 0.0;
  double raw_b = 0.0;
  double raw_c = 0.0;
  double raw_d = 0.0;

  // Raw values whose constrained image is exactly (1, 1, 0.5, 1), which
  // makes C the identity map bit for bit.
  static CalibParams identity();

  std::array<double, 4> constrained() const;  // (a, b, c, d)
};

// The raw value r with softplus(r) == 1.0 exactly in double precision.
double softplus_inverse_one();

// Plain evaluation with constrained parameters. C(0) = 0 and C(1) = 1 hold
// exactly for every valid parameter setting.
double calibrate_value(double alpha, double a, double b, double c, double d);

// Tape version; parameters are already-constrained DiffValues (scalars).
// alpha may be scalar or vector. Training mode clamps alpha away from the
// endpoints before exponentiation so log-gradients stay finite.
DiffValue calibrate(Tape& t, const DiffValue& alpha, const DiffValue& a,
                    const DiffValue& b, const DiffValue& c, const DiffValue& d,
                    ExecMode mode);

// Tape version taking unconstrained parameters; applies softplus/logistic on
// the tape so the fit differentiates through the reparameterization.
DiffValue calibrate_raw(Tape& t, const DiffValue& alpha, const DiffValue& raw_a,
                        const DiffValue& raw_b, const DiffValue& raw_c,
                        const DiffValue& raw_d, ExecMode mode);

// Calibration hook handed to the engine. Keys are "<predicate>@<position>"
// where position is the step index in the compiled program.
class CalibrationApplier {
 public:
  virtual ~CalibrationApplier() = default;
  virtual DiffValue apply(Tape& t, const std::string& key,
                          const DiffValue& alpha, ExecMode mode) const = 0;
};

// Per-context parameter table with a fallback entry for unseen contexts.
class ContextTable : public CalibrationApplier {
 public:
  static std::string make_key(const std::string& pred, int position);

  CalibParams defaults;
  std::map<std::string, CalibParams> entries;
  uint64_t vocab_hash = 0;

  const CalibParams& lookup(const std::string& key) const;
  DiffValue apply(Tape& t, const std::string& key, const DiffValue& alpha,
                  ExecMode mode) const override;

  std::string to_json_text() const;
  static ContextTable from_json_text(const std::string& text);
};

}  // namespace nfol
