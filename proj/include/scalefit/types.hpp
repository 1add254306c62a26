#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

namespace scalefit {

using Real = double;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using Array = Eigen::Array<Real, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-positive input where a positive quantity is required.
class DomainError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A law object violating its own invariants (e.g. additive law without b).
class InvalidLawError : public Error {
 public:
  using Error::Error;
};

/// Fewer data points than the fit can identify parameters from.
class UnderdeterminedError : public Error {
 public:
  using Error::Error;
};

/// Every grid start of a fit failed numerically.
class FitFailureError : public Error {
 public:
  using Error::Error;
};

/// Non-finite objective or gradient; carries the offending iterate.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, Vector iterate)
      : Error(what), iterate_(std::move(iterate)) {}
  const Vector& iterate() const { return iterate_; }

 private:
  Vector iterate_;
};

class NoCrossoverError : public Error {
 public:
  using Error::Error;
};

/// Identical laws or equal decay exponents: the crossover question degenerates.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormError : public Error {
 public:
  using Error::Error;
};

class CorrelationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line) : Error(what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_ = 0;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Noise regeneration retries exhausted while keeping losses positive.
class NoiseError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class FactorKind { model_size, pretraining_tokens, pet_parameters };
enum class Method { fmt, prompt, lora };
enum class Split { fit, held_out };
enum class LawForm { multiplicative, additive };

const char* to_string(FactorKind kind);
const char* to_string(Method method);
const char* to_string(Split split);
const char* to_string(LawForm form);

FactorKind parse_factor_kind(const std::string& text);
Method parse_method(const std::string& text);
Split parse_split(const std::string& text);
LawForm parse_law_form(const std::string& text);

/// Which resource quantity a joint law scales over, with its counting unit.
struct ScalingFactor {
  FactorKind kind = FactorKind::model_size;
  std::string unit;

  static ScalingFactor of(FactorKind kind);
};

/// Default unit for a factor kind ("parameters" or "tokens").
const char* default_unit(FactorKind kind);

/// One experimental observation. Duplicate (task, method, factor, x, d_f)
/// combinations across seeds are legal; aggregation is the ingester's job.
struct Run {
  std::string task;
  Method method = Method::fmt;
  ScalingFactor factor;
  Real x = 0;     // factor value
  Real d_f = 0;   // finetuning example count
  Real loss = 0;  // token-level perplexity
  Split split = Split::fit;
};

/// One-variable data-scaling law, stored in log-parameterization so the
/// materialized amplitude and floor stay strictly positive.
struct SingleVarLaw {
  Real a = 0;     // log amplitude
  Real beta = 0;  // data exponent
  Real e = 0;     // log irreducible loss

  Real amplitude() const { return std::exp(a); }
  Real floor() const { return std::exp(e); }
};

/// Joint law over one scaling factor and finetuning data size. The b
/// coefficient exists exactly in the additive form.
struct JointLaw {
  LawForm form = LawForm::multiplicative;
  ScalingFactor factor;
  Real a = 0;
  std::optional<Real> b;
  Real alpha = 0;
  Real beta = 0;
  Real e = 0;

  Real amplitude() const { return std::exp(a); }
  std::optional<Real> b_amplitude() const {
    return b ? std::optional<Real>(std::exp(*b)) : std::nullopt;
  }
  Real floor() const { return std::exp(e); }

  /// Builds a multiplicative law from natural-space A and E.
  static JointLaw multiplicative(ScalingFactor factor, Real A, Real alpha,
                                 Real beta, Real E);
  /// Builds an additive law from natural-space A, B and E.
  static JointLaw additive(ScalingFactor factor, Real A, Real B, Real alpha,
                           Real beta, Real E);
};

bool operator==(const ScalingFactor& lhs, const ScalingFactor& rhs);
bool operator==(const JointLaw& lhs, const JointLaw& rhs);

/// Throws InvalidLawError unless b is present exactly when the form is additive.
void validate(const JointLaw& law);

struct HuberConfig {
  Real delta = 1e-3;
};

using AnyLaw = std::variant<SingleVarLaw, JointLaw>;

}  // namespace scalefit
