#include "scalefit/types.hpp"

#include <cmath>

namespace scalefit {

const char* to_string(FactorKind kind) {
  switch (kind) {
    case FactorKind::model_size: return "model_size";
    case FactorKind::pretraining_tokens: return "pretraining_tokens";
    case FactorKind::pet_parameters: return "pet_parameters";
  }
  throw ArgumentError("unknown factor kind");
}

const char* to_string(Method method) {
  switch (method) {
    case Method::fmt: return "fmt";
    case Method::prompt: return "prompt";
    case Method::lora: return "lora";
  }
  throw ArgumentError("unknown method");
}

const char* to_string(Split split) {
  switch (split) {
    case Split::fit: return "fit";
    case Split::held_out: return "held_out";
  }
  throw ArgumentError("unknown split");
}

const char* to_string(LawForm form) {
  switch (form) {
    case LawForm::multiplicative: return "multiplicative";
    case LawForm::additive: return "additive";
  }
  throw ArgumentError("unknown law form");
}

FactorKind parse_factor_kind(const std::string& text) {
  if (text == "model_size") return FactorKind::model_size;
  if (text == "pretraining_tokens") return FactorKind::pretraining_tokens;
  if (text == "pet_parameters") return FactorKind::pet_parameters;
  throw ArgumentError("unknown factor kind: '" + text + "'");
}

Method parse_method(const std::string& text) {
  if (text == "fmt") return Method::fmt;
  if (text == "prompt") return Method::prompt;
  if (text == "lora") return Method::lora;
  throw ArgumentError("unknown method: '" + text + "'");
}

Split parse_split(const std::string& text) {
  if (text == "fit") return Split::fit;
  if (text == "held_out") return Split::held_out;
  throw ArgumentError("unknown split: '" + text + "'");
}

LawForm parse_law_form(const std::string& text) {
  if (text == "multiplicative") return LawForm::multiplicative;
  if (text == "additive") return LawForm::additive;
  throw ArgumentError("unknown law form: '" + text + "'");
}

const char* default_unit(FactorKind kind) {
  return kind == FactorKind::pretraining_tokens ? "tokens" : "parameters";
}

ScalingFactor ScalingFactor::of(FactorKind kind) {
  return ScalingFactor{kind, default_unit(kind)};
}

JointLaw JointLaw::multiplicative(ScalingFactor factor, Real A, Real alpha,
                                  Real beta, Real E) {
  if (!(A > 0) || !(E > 0)) {
    throw DomainError("multiplicative law needs positive A and E");
  }
  JointLaw law;
  law.form = LawForm::multiplicative;
  law.factor = std::move(factor);
  law.a = std::log(A);
  law.alpha = alpha;
  law.beta = beta;
  law.e = std::log(E);
  return law;
}

JointLaw JointLaw::additive(ScalingFactor factor, Real A, Real B, Real alpha,
                            Real beta, Real E) {
  if (!(A > 0) || !(B > 0) || !(E > 0)) {
    throw DomainError("additive law needs positive A, B and E");
  }
  JointLaw law;
  law.form = LawForm::additive;
  law.factor = std::move(factor);
  law.a = std::log(A);
  law.b = std::log(B);
  law.alpha = alpha;
  law.beta = beta;
  law.e = std::log(E);
  return law;
}

bool operator==(const ScalingFactor& lhs, const ScalingFactor& rhs) {
  return lhs.kind == rhs.kind && lhs.unit == rhs.unit;
}

bool operator==(const JointLaw& lhs, const JointLaw& rhs) {
  return lhs.form == rhs.form && lhs.factor == rhs.factor && lhs.a == rhs.a &&
         lhs.b == rhs.b && lhs.alpha == rhs.alpha && lhs.beta == rhs.beta &&
         lhs.e == rhs.e;
}

void validate(const JointLaw& law) {
  if (law.form == LawForm::additive && !law.b) {
    throw InvalidLawError("additive law is missing the b coefficient");
  }
  if (law.form == LawForm::multiplicative && law.b) {
    throw InvalidLawError("multiplicative law must not carry a b coefficient");
  }
}

}  // namespace scalefit
