#include "convobs/poly.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <functional>

namespace convobs {

Polynomial substitute(const Polynomial& p, const std::map<std::string, double>& values) {
  const auto& vars = p.vars();
  std::vector<std::string> kept;
  std::vector<int> kept_idx;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (!values.count(vars[i])) {
      kept.push_back(vars[i]);
      kept_idx.push_back(static_cast<int>(i));
    }
  }
  Polynomial::Terms out;
  std::map<Exponent, double> acc;
  for (const auto& [e, c] : p.terms()) {
    double v = c;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (e[i] == 0) continue;
      auto it = values.find(vars[i]);
      if (it == values.end()) continue;
      v *= std::pow(it->second, e[i]);
    }
    Exponent r;
    r.reserve(kept_idx.size());
    for (int i : kept_idx) r.push_back(e[i]);
    acc[r] += v;
  }
  for (auto& [e, c] : acc)
    if (c != 0.0) out.emplace(e, c);
  return Polynomial(kept, out);
}

namespace {

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  Polynomial parse() {
    Polynomial acc;
    skip();
    if (pos_ == s_.size()) throw std::invalid_argument("empty polynomial string");
    bool first = true;
    while (true) {
      skip();
      if (pos_ == s_.size()) break;
      double sign = 1.0;
      if (peek() == '+' || peek() == '-') {
        sign = peek() == '-' ? -1.0 : 1.0;
        ++pos_;
      } else if (!first) {
        fail("expected '+' or '-'");
      }
      first = false;
      acc += term() * sign;
    }
    return acc;
  }

 private:
  Polynomial term() {
    Polynomial t(1.0);
    bool any = false;
    while (true) {
      skip();
      if (pos_ == s_.size()) break;
      char c = peek();
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        t *= number();
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::string name = identifier();
        int pw = 1;
        skip();
        if (pos_ < s_.size() && peek() == '^') {
          ++pos_;
          skip();
          pw = integer();
        }
        t *= pow(Polynomial::variable(name), pw);
      } else if (c == '(') {
        ++pos_;
        Polynomial inner = parse_group();
        int pw = 1;
        skip();
        if (pos_ < s_.size() && peek() == '^') {
          ++pos_;
          skip();
          pw = integer();
        }
        t *= pow(inner, pw);
      } else {
        fail("unexpected character");
      }
      any = true;
      skip();
      if (pos_ < s_.size() && peek() == '*') {
        ++pos_;
        continue;
      }
      break;
    }
    if (!any) fail("empty term");
    return t;
  }

  Polynomial parse_group() {
    std::size_t depth = 1;
    std::size_t start = pos_;
    while (pos_ < s_.size() && depth > 0) {
      if (s_[pos_] == '(') ++depth;
      if (s_[pos_] == ')') --depth;
      ++pos_;
    }
    if (depth != 0) fail("unbalanced parenthesis");
    return Parser(s_.substr(start, pos_ - start - 1)).parse();
  }

  double number() {
    const char* begin = s_.data() + pos_;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail("bad number");
    pos_ += static_cast<std::size_t>(end - begin);
    return v;
  }

  int integer() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) fail("expected integer exponent");
    return std::stoi(s_.substr(start, pos_ - start));
  }

  std::string identifier() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    return s_.substr(start, pos_ - start);
  }

  char peek() const { return s_[pos_]; }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("polynomial parse error at offset " + std::to_string(pos_) + ": " + what +
                                " in '" + s_ + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

Polynomial parse_polynomial(const std::string& text) {
  std::string copy = text;
  return Parser(copy).parse();
}

std::string to_string(const Polynomial& p) {
  if (p.is_zero()) return "0";
  std::string out;
  const auto& vars = p.vars();
  // Descending degree reads more naturally.
  std::vector<std::pair<Exponent, double>> terms(p.terms().begin(), p.terms().end());
  std::stable_sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
    return detail::total_degree(a.first) > detail::total_degree(b.first);
  });
  bool first = true;
  for (const auto& [e, c] : terms) {
    double mag = std::abs(c);
    if (first) {
      if (c < 0) out += "-";
    } else {
      out += c < 0 ? " - " : " + ";
    }
    first = false;
    std::string body;
    bool has_var = false;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e[i] == 0) continue;
      if (has_var) body += "*";
      body += vars[i];
      if (e[i] > 1) body += "^" + std::to_string(e[i]);
      has_var = true;
    }
    if (!has_var) {
      out += format_double(mag);
    } else if (mag == 1.0) {
      out += body;
    } else {
      out += format_double(mag) + "*" + body;
    }
  }
  return out;
}

std::vector<Exponent> monomials_up_to(int nvars, int max_degree, int min_degree) {
  std::vector<Exponent> out;
  if (max_degree < 0) return out;
  Exponent cur(nvars, 0);
  for (int d = std::max(0, min_degree); d <= max_degree; ++d) {
    std::vector<Exponent> level;
    std::function<void(int, int)> rec = [&](int i, int left) {
      if (i == nvars - 1) {
        cur[i] = left;
        level.push_back(cur);
        return;
      }
      for (int k = left; k >= 0; --k) {
        cur[i] = k;
        rec(i + 1, left - k);
      }
    };
    if (nvars == 0) {
      if (d == 0) out.push_back({});
      continue;
    }
    rec(0, d);
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

}  // namespace convobs
