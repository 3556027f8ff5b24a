#ifndef TREECAST_FAMILY_HPP
#define TREECAST_FAMILY_HPP

#include <cctype>
#include <cstdlib>
#include <string>

#include <nlohmann/json.hpp>

#include "treecast/analysis.hpp"
#include "treecast/errors.hpp"
#include "treecast/io.hpp"

namespace treecast {

namespace detail {

// Recursive-descent evaluator for + - * / and parentheses over numbers and the
// single variable "$theta".
class ThetaExpr {
 public:
  ThetaExpr(std::string text, double theta) : s_(std::move(text)), theta_(theta) {}

  double eval() {
    const double v = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected character");
    return v;
  }

 private:
  std::string s_;
  double theta_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw SchemaError("family template: " + what + " at offset " + std::to_string(pos_) + " in \"" + s_ + "\"");
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  double sum() {
    double v = product();
    for (;;) {
      if (eat('+'))
        v += product();
      else if (eat('-'))
        v -= product();
      else
        return v;
    }
  }
  double product() {
    double v = unary();
    for (;;) {
      if (eat('*'))
        v *= unary();
      else if (eat('/'))
        v /= unary();
      else
        return v;
    }
  }
  double unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return atom();
  }
  double atom() {
    skip();
    if (eat('(')) {
      const double v = sum();
      if (!eat(')')) fail("missing ')'");
      return v;
    }
    static constexpr std::string_view kVar = "$theta";
    if (s_.compare(pos_, kVar.size(), kVar) == 0) {
      pos_ += kVar.size();
      return theta_;
    }
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a number or $theta");
    pos_ += static_cast<std::size_t>(end - begin);
    return v;
  }
};

inline nlohmann::json substitute_theta(const nlohmann::json& j, double theta) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s.find("$theta") == std::string::npos) return j;
    return ThetaExpr(s, theta).eval();
  }
  if (j.is_array() || j.is_object()) {
    nlohmann::json out = j;
    for (auto it = out.begin(); it != out.end(); ++it) *it = substitute_theta(*it, theta);
    return out;
  }
  return j;
}

}  // namespace detail

/// Family from {"name", "param", "range": [lo, hi], "template": {...}} where
/// any string containing "$theta" is an arithmetic expression in the parameter.
inline Family family_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("family: expected an object");
  Family f;
  if (j.contains("name")) {
    if (!j.at("name").is_string()) throw SchemaError("family: \"name\" must be a string");
    f.name = j.at("name").get<std::string>();
  }
  if (j.contains("param")) {
    if (!j.at("param").is_string()) throw SchemaError("family: \"param\" must be a string");
    f.param = j.at("param").get<std::string>();
  }
  if (!j.contains("range") || !j.at("range").is_array() || j.at("range").size() != 2 || !j.at("range")[0].is_number() ||
      !j.at("range")[1].is_number())
    throw SchemaError("family: \"range\" must be [lo, hi]");
  f.lo = j.at("range")[0].get<double>();
  f.hi = j.at("range")[1].get<double>();
  if (!(f.hi > f.lo)) throw SchemaError("family: range must satisfy lo < hi");
  if (!j.contains("template") || !j.at("template").is_object()) throw SchemaError("family: missing object \"template\"");
  const nlohmann::json tmpl = j.at("template");
  // Instantiate once so template errors surface at load time.
  (void)io::model_from_json(detail::substitute_theta(tmpl, 0.5 * (f.lo + f.hi)));
  f.generator = [tmpl](double theta) { return io::model_from_json(detail::substitute_theta(tmpl, theta)); };
  return f;
}

}  // namespace treecast

#endif  // TREECAST_FAMILY_HPP
