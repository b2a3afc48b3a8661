#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "popde/errors.hpp"
#include "popde/problems.hpp"

namespace popde {

namespace {

// ---- arithmetic expression samplers ----------------------------------------

struct ExprNode {
  enum class Kind { num, var_x, var_y, unary, binop } kind;
  double value = 0.0;
  char op = 0;          // binop: + - * / ^
  int fn = -1;          // unary function id
  std::shared_ptr<ExprNode> a, b;

  double eval(double x, double y) const {
    switch (kind) {
      case Kind::num: return value;
      case Kind::var_x: return x;
      case Kind::var_y: return y;
      case Kind::unary: {
        double v = a->eval(x, y);
        switch (fn) {
          case 0: return std::exp(v);
          case 1: return std::sin(v);
          case 2: return std::cos(v);
          case 3: return std::sqrt(v);
          case 4: return std::log(v);
          case 5: return std::fabs(v);
          case 6: return -v;
        }
        return v;
      }
      case Kind::binop: {
        double l = a->eval(x, y), r = b->eval(x, y);
        switch (op) {
          case '+': return l + r;
          case '-': return l - r;
          case '*': return l * r;
          case '/': return l / r;
          case '^': return std::pow(l, r);
        }
        return 0.0;
      }
    }
    return 0.0;
  }
};

using NodePtr = std::shared_ptr<ExprNode>;

NodePtr make_num(double v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::num;
  n->value = v;
  return n;
}

NodePtr make_unary(int fn, NodePtr a) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::unary;
  n->fn = fn;
  n->a = std::move(a);
  return n;
}

NodePtr make_binop(char op, NodePtr a, NodePtr b) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::binop;
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

struct ExprParser {
  const std::string& s;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  char peek() {
    skip_ws();
    return pos < s.size() ? s[pos] : '\0';
  }

  NodePtr expr() {
    NodePtr r = term();
    for (;;) {
      char c = peek();
      if (c == '+' || c == '-') {
        ++pos;
        r = make_binop(c, r, term());
      } else {
        return r;
      }
    }
  }

  NodePtr term() {
    NodePtr r = factor();
    for (;;) {
      char c = peek();
      if (c == '*' || c == '/') {
        ++pos;
        r = make_binop(c, r, factor());
      } else {
        return r;
      }
    }
  }

  NodePtr factor() {
    char c = peek();
    if (c == '-') {
      ++pos;
      return make_unary(6, factor());
    }
    if (c == '+') {
      ++pos;
      return factor();
    }
    NodePtr base = atom();
    if (peek() == '^') {
      ++pos;
      return make_binop('^', base, factor());
    }
    return base;
  }

  NodePtr atom() {
    skip_ws();
    if (pos >= s.size()) throw ParseError("unexpected end of expression");
    char c = s[pos];
    if (c == '(') {
      ++pos;
      NodePtr r = expr();
      if (peek() != ')') throw ParseError("missing ')' in expression");
      ++pos;
      return r;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = std::stod(s.substr(pos), &used);
      pos += used;
      return make_num(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos;
      while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
      std::string name = s.substr(start, pos - start);
      if (name == "x") {
        auto n = std::make_shared<ExprNode>();
        n->kind = ExprNode::Kind::var_x;
        return n;
      }
      if (name == "y") {
        auto n = std::make_shared<ExprNode>();
        n->kind = ExprNode::Kind::var_y;
        return n;
      }
      if (name == "pi") return make_num(3.14159265358979323846);
      if (name == "e") return make_num(2.71828182845904523536);
      static const std::map<std::string, int> fns = {{"exp", 0}, {"sin", 1}, {"cos", 2},
                                                     {"sqrt", 3}, {"log", 4}, {"abs", 5}};
      auto it = fns.find(name);
      if (it == fns.end()) throw LookupError("unknown name '" + name + "' in expression");
      if (peek() != '(') throw ParseError("function '" + name + "' needs parentheses");
      ++pos;
      NodePtr arg = expr();
      if (peek() != ')') throw ParseError("missing ')' after function argument");
      ++pos;
      return make_unary(it->second, arg);
    }
    throw ParseError(std::string("unexpected character '") + c + "' in expression");
  }
};

// ---- problem file parsing ---------------------------------------------------

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::pair<double, double> parse_interval(const std::string& text, const std::string& what) {
  std::string t = trim(text);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']')
    throw ParseError(what + " must be an interval like [a, b]");
  std::string inner = t.substr(1, t.size() - 2);
  std::size_t comma = inner.find(',');
  if (comma == std::string::npos) throw ParseError(what + " needs two comma-separated values");
  try {
    return {std::stod(trim(inner.substr(0, comma))), std::stod(trim(inner.substr(comma + 1)))};
  } catch (const std::exception&) {
    throw ParseError(what + " holds a malformed number");
  }
}

struct Section {
  std::string header;
  std::map<std::string, std::string> kv;
};

}  // namespace

Sampler parse_sampler_expression(const std::string& text) {
  ExprParser p{text, 0};
  NodePtr root = p.expr();
  p.skip_ws();
  if (p.pos != text.size()) throw ParseError("trailing characters in expression: " + text);
  return [root](double x, double y) { return root->eval(x, y); };
}

DiffProblem parse_problem_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::map<std::string, std::string> top;
  std::vector<Section> sections;
  std::string line;
  Section* open = nullptr;
  Section pending;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.back() == '{') {
      if (open) throw ParseError(origin + ": nested section at line " + std::to_string(lineno));
      pending = Section{trim(line.substr(0, line.size() - 1)), {}};
      open = &pending;
      continue;
    }
    if (line == "}") {
      if (!open) throw ParseError(origin + ": stray '}' at line " + std::to_string(lineno));
      sections.push_back(pending);
      open = nullptr;
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(origin + ": expected key = value at line " + std::to_string(lineno));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (open)
      open->kv[key] = value;
    else
      top[key] = value;
  }
  if (open) throw ParseError(origin + ": unterminated section '" + pending.header + "'");

  auto need = [&](const std::map<std::string, std::string>& kv, const std::string& key,
                  const std::string& where) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(origin + ": missing '" + key + "' in " + where);
    return it->second;
  };

  DiffProblem p;
  p.name = top.count("name") ? top.at("name") : "user_problem";
  p.domain.dims = std::stoi(need(top, "dims", "top level"));
  auto [xa, xb] = parse_interval(need(top, "domain_x", "top level"), "domain_x");
  p.domain.x_min = xa;
  p.domain.x_max = xb;
  if (p.domain.dims == 2) {
    auto [ya, yb] = parse_interval(need(top, "domain_y", "top level"), "domain_y");
    p.domain.y_min = ya;
    p.domain.y_max = yb;
  }
  p.unknowns = std::stoi(need(top, "unknowns", "top level"));
  if (top.count("scalars")) {
    std::istringstream ss(top.at("scalars"));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) p.scalar_names.push_back(tok);
    }
  }
  for (int k = 0; k < p.unknowns; ++k) {
    std::string key = "bounds u" + std::to_string(k);
    auto [lo, hi] = parse_interval(need(top, key, "top level"), key);
    p.lbd.push_back(lo);
    p.ubd.push_back(hi);
  }
  for (const auto& s : p.scalar_names) {
    std::string key = "bounds " + s;
    p.scalar_bounds.push_back(parse_interval(need(top, key, "top level"), key));
  }

  SymbolTable st = p.symbols();
  auto names = st.names();
  auto parse_rhs = [&](const Section& sec) -> Sampler {
    auto it = sec.kv.find("rhs");
    if (it == sec.kv.end()) return [](double, double) { return 0.0; };
    return parse_sampler_expression(it->second);
  };

  bool have_objective = false;
  for (const auto& sec : sections) {
    std::istringstream hs(sec.header);
    std::string kind, arg;
    hs >> kind >> arg;
    if (kind == "interior") {
      Equation eq;
      eq.lhs = Polynomial::parse(need(sec.kv, "eq", "interior section"), names);
      eq.rhs = parse_rhs(sec);
      if (sec.kv.count("scheme")) {
        const std::string& s = sec.kv.at("scheme");
        if (s == "central")
          eq.scheme = EqScheme::central;
        else if (s == "trapezoid")
          eq.scheme = EqScheme::pairwise_trapezoid;
        else
          throw ParseError(origin + ": unknown scheme '" + s + "'");
      }
      eq.label = sec.kv.count("label") ? sec.kv.at("label") : "interior";
      p.interior.push_back(std::move(eq));
    } else if (kind == "boundary") {
      BoundaryEquation eq;
      if (arg == "left")
        eq.face = Face::left;
      else if (arg == "right")
        eq.face = Face::right;
      else if (arg == "bottom")
        eq.face = Face::bottom;
      else if (arg == "top")
        eq.face = Face::top;
      else
        throw ParseError(origin + ": boundary section needs a face (left/right/bottom/top)");
      eq.lhs = Polynomial::parse(need(sec.kv, "eq", "boundary section"), names);
      eq.rhs = parse_rhs(sec);
      eq.label = sec.kv.count("label") ? sec.kv.at("label") : ("boundary_" + arg);
      p.boundary.push_back(std::move(eq));
    } else if (kind == "objective") {
      have_objective = true;
      const std::string& k = need(sec.kv, "kind", "objective section");
      if (k == "neg_sum") {
        p.objective.kind = ObjectiveKind::neg_sum;
      } else if (k == "midpoint") {
        p.objective.kind = ObjectiveKind::midpoint;
        p.objective.midpoint_unknown =
            sec.kv.count("unknown") ? std::stoi(sec.kv.at("unknown")) : 0;
      } else if (k == "integral") {
        p.objective.kind = ObjectiveKind::integral_functional;
        p.objective.integrand =
            Polynomial::parse(need(sec.kv, "integrand", "objective section"), names);
      } else if (k == "free_time") {
        p.objective.kind = ObjectiveKind::free_time;
        const std::string& s = need(sec.kv, "scalar", "objective section");
        int idx = -1;
        for (int j = 0; j < static_cast<int>(p.scalar_names.size()); ++j)
          if (p.scalar_names[j] == s) idx = j;
        if (idx < 0) throw LookupError(origin + ": unknown scalar '" + s + "' in objective");
        p.objective.time_scalar = idx;
      } else {
        throw ParseError(origin + ": unknown objective kind '" + k + "'");
      }
    } else {
      throw ParseError(origin + ": unknown section '" + sec.header + "'");
    }
  }
  if (!have_objective)
    throw ParseError(origin + ": problem file needs an objective section");
  p.validate();
  return p;
}

DiffProblem load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open problem file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_problem_text(buf.str(), path);
}

}  // namespace popde
