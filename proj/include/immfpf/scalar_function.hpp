#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "immfpf/error.hpp"
#include "immfpf/text.hpp"

namespace immfpf {

/// Closed family of scalar maps used for drifts and observation functions.
///
///   polynomial: c0 + c1*x + c2*x^2 + ...
///   arctan:     scale * atan(x / length)
///
/// Text form is `poly:c0,c1,...` or `arctan:length[,scale]`.
class ScalarFunction {
 public:
  enum class Kind { polynomial, arctan };

  ScalarFunction() : ScalarFunction(Kind::polynomial, {0.0}) {}

  static ScalarFunction constant(double c) { return {Kind::polynomial, {c}}; }
  static ScalarFunction affine(double offset, double slope) {
    return {Kind::polynomial, {offset, slope}};
  }
  static ScalarFunction polynomial(std::vector<double> coefficients) {
    require(!coefficients.empty(), "polynomial needs at least one coefficient");
    return {Kind::polynomial, std::move(coefficients)};
  }
  static ScalarFunction arctan(double length, double scale = 1.0) {
    require(length != 0.0 && std::isfinite(length), "arctan length must be finite and nonzero");
    return {Kind::arctan, {length, scale}};
  }

  double operator()(double x) const {
    if (kind_ == Kind::arctan) return params_[1] * std::atan(x / params_[0]);
    double acc = 0.0;
    for (auto it = params_.rbegin(); it != params_.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  Kind kind() const { return kind_; }
  const std::vector<double>& params() const { return params_; }

  /// True when the map does not depend on x.
  bool is_constant() const {
    if (kind_ == Kind::arctan) return params_[1] == 0.0;
    for (std::size_t i = 1; i < params_.size(); ++i)
      if (params_[i] != 0.0) return false;
    return true;
  }

  std::string to_string() const {
    std::string out = kind_ == Kind::arctan ? "arctan:" : "poly:";
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (i) out += ',';
      out += text::format_double(params_[i]);
    }
    return out;
  }

  static ScalarFunction parse(std::string_view spec) {
    spec = text::trim(spec);
    const auto colon = spec.find(':');
    if (colon == std::string_view::npos)
      fail(ErrorCode::parse_error, "function '" + std::string(spec) + "' lacks a 'kind:' prefix");
    const auto kind = text::trim(spec.substr(0, colon));
    std::vector<double> values;
    for (auto tok : text::split(spec.substr(colon + 1), ',')) {
      const auto v = text::to_double(tok);
      if (!v) fail(ErrorCode::parse_error, "bad number '" + std::string(tok) + "' in function");
      values.push_back(*v);
    }
    if (kind == "poly") return polynomial(std::move(values));
    if (kind == "arctan") {
      if (values.size() == 1) return arctan(values[0]);
      if (values.size() == 2) return arctan(values[0], values[1]);
      fail(ErrorCode::parse_error, "arctan takes 'length[,scale]'");
    }
    fail(ErrorCode::parse_error, "unknown function kind '" + std::string(kind) + "'");
  }

  bool operator==(const ScalarFunction&) const = default;

 private:
  ScalarFunction(Kind kind, std::vector<double> params)
      : kind_(kind), params_(std::move(params)) {}

  Kind kind_;
  std::vector<double> params_;
};

}  // namespace immfpf
