#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace popde {

// Sparse monomial: sorted (variable, exponent) factors, exponents > 0.
class Monomial {
 public:
  Monomial() = default;
  static Monomial var(int v, int exp = 1);

  int degree() const;
  int exponent(int v) const;
  bool is_one() const { return factors_.empty(); }
  const std::vector<std::pair<int, int>>& factors() const { return factors_; }
  int max_var() const { return factors_.empty() ? -1 : factors_.back().first; }

  Monomial operator*(const Monomial& o) const;
  bool operator==(const Monomial& o) const { return factors_ == o.factors_; }

  // graded-lex: degree first, then lexicographic on exponent vectors
  static bool glex_less(const Monomial& a, const Monomial& b);

  std::string to_string(std::span<const std::string> names = {}) const;

 private:
  std::vector<std::pair<int, int>> factors_;
};

struct MonomialHash {
  std::size_t operator()(const Monomial& m) const {
    std::uint64_t h = 1469598103934665603ull;
    for (auto [v, e] : m.factors()) {
      h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ull;
      h = (h ^ static_cast<std::uint64_t>(e)) * 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

struct GlexLess {
  bool operator()(const Monomial& a, const Monomial& b) const {
    return Monomial::glex_less(a, b);
  }
};

// Sparse multivariate polynomial with double coefficients over a fixed
// ambient variable count. Values are immutable in spirit: all operations
// return new polynomials.
class Polynomial {
 public:
  using TermMap = std::map<Monomial, double, GlexLess>;

  explicit Polynomial(int nvars = 0) : nvars_(nvars) {}
  static Polynomial constant(int nvars, double c);
  static Polynomial variable(int nvars, int v);

  int nvars() const { return nvars_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;  // 0 for the zero polynomial
  double coefficient(const Monomial& m) const;
  double constant_term() const { return coefficient(Monomial{}); }

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator*(double c) const;
  Polynomial operator-() const { return *this * -1.0; }
  Polynomial& operator+=(const Polynomial& o) { return *this = *this + o; }

  void add_term(const Monomial& m, double c);

  double evaluate(std::span<const double> x) const;
  std::set<int> support_vars() const;
  Polynomial derivative(int v) const;

  // Simultaneous substitution var -> subs[var] (all subs over `new_nvars`).
  // Variables absent from `subs` must not occur in the polynomial.
  Polynomial substitute(const std::map<int, Polynomial>& subs, int new_nvars) const;
  Polynomial pow(int e) const;

  // Renumbers variables into a smaller ambient space; `remap[v] < 0` means the
  // variable is replaced by the constant `fixed[v]`.
  Polynomial remap_vars(std::span<const int> remap, std::span<const double> fixed,
                        int new_nvars) const;

  std::string to_string(std::span<const std::string> names = {}) const;

  // Parses "2 * x0^2 x1 - x2 + 3" style strings (also accepts parentheses
  // and explicit '*'). Symbols are resolved against `names`.
  static Polynomial parse(const std::string& text, std::span<const std::string> names);

 private:
  void check_same_space(const Polynomial& o) const;

  int nvars_ = 0;
  TermMap terms_;
};

inline Polynomial operator*(double c, const Polynomial& p) { return p * c; }

}  // namespace popde
