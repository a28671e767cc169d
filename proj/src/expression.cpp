#include "swjd/expression.hpp"

#include "swjd/types.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace swjd {

enum class Code : unsigned char {
  constant,
  variable,
  neg,
  add,
  sub,
  mul,
  div,
  pow,
  lt,
  le,
  gt,
  ge,
  eq,
  ne,
  abs,
  sqrt,
  exp,
  log,
  sin,
  cos,
  tan,
  tanh,
  sinh,
  cosh,
  atan,
  floor,
  sign,
  min,
  max,
  select,
};

struct Expression::Op {
  Code code;
  int index = 0;
  double value = 0.0;
};

namespace {

struct Function {
  const char* name;
  Code code;
  int arity;
};

constexpr Function kFunctions[] = {
    {"abs", Code::abs, 1},   {"sqrt", Code::sqrt, 1}, {"exp", Code::exp, 1},     {"log", Code::log, 1},
    {"sin", Code::sin, 1},   {"cos", Code::cos, 1},   {"tan", Code::tan, 1},     {"tanh", Code::tanh, 1},
    {"sinh", Code::sinh, 1}, {"cosh", Code::cosh, 1}, {"atan", Code::atan, 1},   {"floor", Code::floor, 1},
    {"sign", Code::sign, 1}, {"pow", Code::pow, 2},   {"min", Code::min, 2},     {"max", Code::max, 2},
    {"if", Code::select, 3},
};

class Parser {
 public:
  Parser(const std::string& text, const std::vector<std::string>& vars) : s_(text), vars_(vars) {}

  std::vector<Expression::Op> run(int& max_depth) {
    cmp();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    max_depth = max_depth_;
    return std::move(out_);
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream msg;
    msg << "expression '" << s_ << "': " << what << " at position " << pos_ + 1;
    throw InvalidInput(msg.str());
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(const char* tok) {
    skip();
    const std::size_t n = std::char_traits<char>::length(tok);
    if (s_.compare(pos_, n, tok) == 0) {
      pos_ += n;
      return true;
    }
    return false;
  }

  void emit(Code c, int pops, int pushes = 1, int index = 0, double value = 0.0) {
    out_.push_back({c, index, value});
    depth_ += pushes - pops;
    max_depth_ = std::max(max_depth_, depth_);
  }

  void cmp() {
    sum();
    struct Rel {
      const char* tok;
      Code code;
    };
    static constexpr Rel rels[] = {{"<=", Code::le}, {">=", Code::ge}, {"==", Code::eq}, {"!=", Code::ne},
                                   {"<", Code::lt},  {">", Code::gt}};
    for (const auto& r : rels) {
      if (accept(r.tok)) {
        sum();
        emit(r.code, 2);
        return;
      }
    }
  }

  void sum() {
    product();
    for (;;) {
      if (accept("+")) {
        product();
        emit(Code::add, 2);
      } else if (accept("-")) {
        product();
        emit(Code::sub, 2);
      } else {
        return;
      }
    }
  }

  void product() {
    unary();
    for (;;) {
      if (accept("*")) {
        unary();
        emit(Code::mul, 2);
      } else if (accept("/")) {
        unary();
        emit(Code::div, 2);
      } else {
        return;
      }
    }
  }

  void unary() {
    if (accept("-")) {
      unary();
      emit(Code::neg, 1);
    } else if (accept("+")) {
      unary();
    } else {
      power();
    }
  }

  void power() {
    primary();
    if (accept("^")) {
      unary();
      emit(Code::pow, 2);
    }
  }

  void primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      cmp();
      if (!accept(")")) fail("expected ')'");
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      skip();
      if (pos_ < s_.size() && s_[pos_] == '(') {
        call(name, start);
        return;
      }
      const auto it = std::find(vars_.begin(), vars_.end(), name);
      if (it != vars_.end()) {
        emit(Code::variable, 0, 1, static_cast<int>(it - vars_.begin()));
      } else if (name == "pi") {
        emit(Code::constant, 0, 1, 0, std::numbers::pi);
      } else if (name == "e") {
        emit(Code::constant, 0, 1, 0, std::numbers::e);
      } else {
        pos_ = start;
        std::string known;
        for (const auto& v : vars_) known += " " + v;
        fail("unknown name '" + name + "' (variables:" + known + ")");
      }
      return;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  void number() {
    std::size_t end = pos_;
    while (end < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.')) ++end;
    if (end < s_.size() && (s_[end] == 'e' || s_[end] == 'E')) {
      std::size_t e = end + 1;
      if (e < s_.size() && (s_[e] == '+' || s_[e] == '-')) ++e;
      if (e < s_.size() && std::isdigit(static_cast<unsigned char>(s_[e]))) {
        end = e;
        while (end < s_.size() && std::isdigit(static_cast<unsigned char>(s_[end]))) ++end;
      }
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + end, v);
    if (ec != std::errc() || ptr != s_.data() + end) fail("malformed number");
    pos_ = end;
    emit(Code::constant, 0, 1, 0, v);
  }

  void call(const std::string& name, std::size_t start) {
    const Function* fn = nullptr;
    for (const auto& f : kFunctions)
      if (name == f.name) fn = &f;
    if (!fn) {
      pos_ = start;
      fail("unknown function '" + name + "'");
    }
    accept("(");
    int args = 0;
    if (!accept(")")) {
      do {
        cmp();
        ++args;
      } while (accept(","));
      if (!accept(")")) fail("expected ')' after arguments of " + name);
    }
    if (args != fn->arity) {
      pos_ = start;
      fail(name + " takes " + std::to_string(fn->arity) + " argument(s), got " + std::to_string(args));
    }
    emit(fn->code, fn->arity);
  }

  const std::string& s_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
  int depth_ = 0;
  int max_depth_ = 0;
  std::vector<Expression::Op> out_;
};

}  // namespace

Expression Expression::parse(const std::string& text, const std::vector<std::string>& variables) {
  Expression e;
  e.text_ = text;
  e.variables_ = variables;
  Parser p(text, variables);
  auto program = p.run(e.max_depth_);
  e.used_.assign(variables.size(), false);
  for (const auto& op : program)
    if (op.code == Code::variable) e.used_[op.index] = true;
  e.program_ = std::make_shared<const std::vector<Op>>(std::move(program));
  return e;
}

bool Expression::uses(const std::string& variable) const {
  const auto it = std::find(variables_.begin(), variables_.end(), variable);
  return it != variables_.end() && used_[it - variables_.begin()];
}

double Expression::eval(const double* vars) const {
  if (!program_) throw InvalidInput("evaluating an empty expression");
  constexpr int kLocal = 64;
  double local[kLocal] = {};
  std::vector<double> heap;
  double* st = local;
  if (max_depth_ > kLocal) {
    heap.resize(max_depth_);
    st = heap.data();
  }
  int sp = 0;
  for (const Op& op : *program_) {
    switch (op.code) {
      case Code::constant: st[sp++] = op.value; break;
      case Code::variable: st[sp++] = vars[op.index]; break;
      case Code::neg: st[sp - 1] = -st[sp - 1]; break;
      case Code::add: --sp; st[sp - 1] += st[sp]; break;
      case Code::sub: --sp; st[sp - 1] -= st[sp]; break;
      case Code::mul: --sp; st[sp - 1] *= st[sp]; break;
      case Code::div: --sp; st[sp - 1] /= st[sp]; break;
      case Code::pow: --sp; st[sp - 1] = std::pow(st[sp - 1], st[sp]); break;
      case Code::lt: --sp; st[sp - 1] = st[sp - 1] < st[sp]; break;
      case Code::le: --sp; st[sp - 1] = st[sp - 1] <= st[sp]; break;
      case Code::gt: --sp; st[sp - 1] = st[sp - 1] > st[sp]; break;
      case Code::ge: --sp; st[sp - 1] = st[sp - 1] >= st[sp]; break;
      case Code::eq: --sp; st[sp - 1] = st[sp - 1] == st[sp]; break;
      case Code::ne: --sp; st[sp - 1] = st[sp - 1] != st[sp]; break;
      case Code::abs: st[sp - 1] = std::abs(st[sp - 1]); break;
      case Code::sqrt: st[sp - 1] = std::sqrt(st[sp - 1]); break;
      case Code::exp: st[sp - 1] = std::exp(st[sp - 1]); break;
      case Code::log: st[sp - 1] = std::log(st[sp - 1]); break;
      case Code::sin: st[sp - 1] = std::sin(st[sp - 1]); break;
      case Code::cos: st[sp - 1] = std::cos(st[sp - 1]); break;
      case Code::tan: st[sp - 1] = std::tan(st[sp - 1]); break;
      case Code::tanh: st[sp - 1] = std::tanh(st[sp - 1]); break;
      case Code::sinh: st[sp - 1] = std::sinh(st[sp - 1]); break;
      case Code::cosh: st[sp - 1] = std::cosh(st[sp - 1]); break;
      case Code::atan: st[sp - 1] = std::atan(st[sp - 1]); break;
      case Code::floor: st[sp - 1] = std::floor(st[sp - 1]); break;
      case Code::sign: st[sp - 1] = (st[sp - 1] > 0) - (st[sp - 1] < 0); break;
      case Code::min: --sp; st[sp - 1] = std::min(st[sp - 1], st[sp]); break;
      case Code::max: --sp; st[sp - 1] = std::max(st[sp - 1], st[sp]); break;
      case Code::select:
        sp -= 2;
        st[sp - 1] = st[sp - 1] != 0.0 ? st[sp] : st[sp + 1];
        break;
    }
  }
  return st[0];
}

}  // namespace swjd
