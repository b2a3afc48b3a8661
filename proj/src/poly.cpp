#include "popde/poly.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "popde/errors.hpp"

namespace popde {

Monomial Monomial::var(int v, int exp) {
  Monomial m;
  if (exp < 0) throw ParameterError("negative exponent");
  if (exp > 0) m.factors_.push_back({v, exp});
  return m;
}

int Monomial::degree() const {
  int d = 0;
  for (auto [v, e] : factors_) d += e;
  return d;
}

int Monomial::exponent(int v) const {
  for (auto [var, e] : factors_)
    if (var == v) return e;
  return 0;
}

Monomial Monomial::operator*(const Monomial& o) const {
  Monomial r;
  auto a = factors_.begin(), b = o.factors_.begin();
  while (a != factors_.end() || b != o.factors_.end()) {
    if (b == o.factors_.end() || (a != factors_.end() && a->first < b->first)) {
      r.factors_.push_back(*a++);
    } else if (a == factors_.end() || b->first < a->first) {
      r.factors_.push_back(*b++);
    } else {
      r.factors_.push_back({a->first, a->second + b->second});
      ++a, ++b;
    }
  }
  return r;
}

bool Monomial::glex_less(const Monomial& a, const Monomial& b) {
  int da = a.degree(), db = b.degree();
  if (da != db) return da < db;
  // lex on exponent vectors: larger exponent on the earliest variable wins
  auto ia = a.factors_.begin(), ib = b.factors_.begin();
  while (ia != a.factors_.end() && ib != b.factors_.end()) {
    if (ia->first != ib->first) return ia->first > ib->first;
    if (ia->second != ib->second) return ia->second < ib->second;
    ++ia, ++ib;
  }
  return ia == a.factors_.end() && ib != b.factors_.end();
}

std::string Monomial::to_string(std::span<const std::string> names) const {
  if (factors_.empty()) return "1";
  std::ostringstream os;
  bool first = true;
  for (auto [v, e] : factors_) {
    if (!first) os << ' ';
    first = false;
    if (v < static_cast<int>(names.size()))
      os << names[v];
    else
      os << 'x' << v;
    if (e > 1) os << '^' << e;
  }
  return os.str();
}

Polynomial Polynomial::constant(int nvars, double c) {
  Polynomial p(nvars);
  p.add_term(Monomial{}, c);
  return p;
}

Polynomial Polynomial::variable(int nvars, int v) {
  if (v < 0 || v >= nvars) throw StructuralError("variable index out of range");
  Polynomial p(nvars);
  p.add_term(Monomial::var(v), 1.0);
  return p;
}

int Polynomial::degree() const {
  return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Monomial& m, double c) {
  if (c == 0.0) return;
  if (m.max_var() >= nvars_) throw StructuralError("monomial variable outside ambient space");
  auto [it, inserted] = terms_.try_emplace(m, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

void Polynomial::check_same_space(const Polynomial& o) const {
  if (nvars_ != o.nvars_)
    throw StructuralError("polynomial dimension mismatch: " + std::to_string(nvars_) +
                          " vs " + std::to_string(o.nvars_));
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  check_same_space(o);
  Polynomial r = *this;
  for (const auto& [m, c] : o.terms_) r.add_term(m, c);
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
  check_same_space(o);
  Polynomial r = *this;
  for (const auto& [m, c] : o.terms_) r.add_term(m, -c);
  return r;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  check_same_space(o);
  Polynomial r(nvars_);
  for (const auto& [ma, ca] : terms_)
    for (const auto& [mb, cb] : o.terms_) r.add_term(ma * mb, ca * cb);
  return r;
}

Polynomial Polynomial::operator*(double c) const {
  Polynomial r(nvars_);
  if (c == 0.0) return r;
  for (const auto& [m, coef] : terms_) r.add_term(m, coef * c);
  return r;
}

double Polynomial::evaluate(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != nvars_)
    throw StructuralError("evaluation point length mismatch");
  double s = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = c;
    for (auto [v, e] : m.factors()) {
      double base = x[v], p = 1.0;
      for (int k = 0; k < e; ++k) p *= base;
      t *= p;
    }
    s += t;
  }
  return s;
}

std::set<int> Polynomial::support_vars() const {
  std::set<int> s;
  for (const auto& [m, c] : terms_)
    for (auto [v, e] : m.factors()) s.insert(v);
  return s;
}

Polynomial Polynomial::derivative(int v) const {
  Polynomial r(nvars_);
  for (const auto& [m, c] : terms_) {
    int e = m.exponent(v);
    if (e == 0) continue;
    Monomial dm;
    for (auto [var, exp] : m.factors()) {
      if (var == v) {
        if (exp > 1) dm = dm * Monomial::var(var, exp - 1);
      } else {
        dm = dm * Monomial::var(var, exp);
      }
    }
    r.add_term(dm, c * e);
  }
  return r;
}

Polynomial Polynomial::pow(int e) const {
  if (e < 0) throw ParameterError("negative polynomial power");
  Polynomial r = Polynomial::constant(nvars_, 1.0);
  for (int k = 0; k < e; ++k) r = r * *this;
  return r;
}

Polynomial Polynomial::substitute(const std::map<int, Polynomial>& subs, int new_nvars) const {
  Polynomial r(new_nvars);
  for (const auto& [m, c] : terms_) {
    Polynomial t = Polynomial::constant(new_nvars, c);
    for (auto [v, e] : m.factors()) {
      auto it = subs.find(v);
      if (it == subs.end()) throw StructuralError("no substitution for variable " + std::to_string(v));
      t = t * it->second.pow(e);
    }
    for (const auto& [mt, ct] : t.terms()) r.add_term(mt, ct);
  }
  return r;
}

Polynomial Polynomial::remap_vars(std::span<const int> remap, std::span<const double> fixed,
                                  int new_nvars) const {
  Polynomial r(new_nvars);
  for (const auto& [m, c] : terms_) {
    double coef = c;
    Monomial nm;
    for (auto [v, e] : m.factors()) {
      int nv = remap[v];
      if (nv < 0) {
        double p = 1.0;
        for (int k = 0; k < e; ++k) p *= fixed[v];
        coef *= p;
      } else {
        nm = nm * Monomial::var(nv, e);
      }
    }
    r.add_term(nm, coef);
  }
  return r;
}

std::string Polynomial::to_string(std::span<const std::string> names) const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  // highest graded-lex terms first
  for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
    double c = it->second;
    if (first) {
      if (c < 0) os << "-";
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    first = false;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", std::fabs(c));
    if (it->first.is_one()) {
      os << buf;
    } else {
      if (std::fabs(c) != 1.0) os << buf << " * ";
      os << it->first.to_string(names);
    }
  }
  return os.str();
}

namespace {

struct Parser {
  const std::string& s;
  std::size_t pos = 0;
  std::span<const std::string> names;

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  char peek() {
    skip_ws();
    return pos < s.size() ? s[pos] : '\0';
  }

  Polynomial parse_expr() {
    Polynomial r = parse_term();
    for (;;) {
      char c = peek();
      if (c == '+') {
        ++pos;
        r = r + parse_term();
      } else if (c == '-') {
        ++pos;
        r = r - parse_term();
      } else {
        return r;
      }
    }
  }

  Polynomial parse_term() {
    Polynomial r = parse_factor();
    for (;;) {
      char c = peek();
      if (c == '*') {
        ++pos;
        r = r * parse_factor();
      } else if (c == '(' || std::isalpha(static_cast<unsigned char>(c)) ||
                 std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        r = r * parse_factor();  // juxtaposition
      } else {
        return r;
      }
    }
  }

  Polynomial parse_factor() {
    char c = peek();
    if (c == '-') {
      ++pos;
      return -parse_factor();
    }
    if (c == '+') {
      ++pos;
      return parse_factor();
    }
    Polynomial base = parse_base();
    if (peek() == '^') {
      ++pos;
      skip_ws();
      std::size_t start = pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
      if (start == pos) throw ParseError("expected integer exponent at position " + std::to_string(pos));
      return base.pow(std::stoi(s.substr(start, pos - start)));
    }
    return base;
  }

  Polynomial parse_base() {
    skip_ws();
    int nvars = static_cast<int>(names.size());
    if (pos >= s.size()) throw ParseError("unexpected end of polynomial string");
    char c = s[pos];
    if (c == '(') {
      ++pos;
      Polynomial r = parse_expr();
      if (peek() != ')') throw ParseError("missing ')' at position " + std::to_string(pos));
      ++pos;
      return r;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = std::stod(s.substr(pos), &used);
      pos += used;
      return Polynomial::constant(nvars, v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos;
      while (pos < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
        ++pos;
      std::string name = s.substr(start, pos - start);
      for (int v = 0; v < nvars; ++v)
        if (names[v] == name) return Polynomial::variable(nvars, v);
      throw LookupError("unknown symbol '" + name + "' in polynomial");
    }
    throw ParseError(std::string("unexpected character '") + c + "' at position " +
                     std::to_string(pos));
  }
};

}  // namespace

Polynomial Polynomial::parse(const std::string& text, std::span<const std::string> names) {
  Parser p{text, 0, names};
  Polynomial r = p.parse_expr();
  p.skip_ws();
  if (p.pos != text.size())
    throw ParseError("trailing characters in polynomial at position " + std::to_string(p.pos));
  return r;
}

}  // namespace popde
