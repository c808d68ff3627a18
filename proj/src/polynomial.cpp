#include <cctype>
#include <cmath>
#include <string>

#include "tcrisis/problem.hpp"

namespace tcrisis {
namespace {

double ipow(double base, int exponent) {
  double result = 1.0;
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

// Recursive-descent reader for sums of monomials.
class PolynomialReader {
 public:
  PolynomialReader(std::string_view text, int nx, int nu)
      : text_(text), nx_(nx), nu_(nu), poly_(nx + nu) {}

  Polynomial read() {
    skip_space();
    if (at_end()) fail("empty polynomial");
    double sign = 1.0;
    if (peek() == '+' || peek() == '-') {
      sign = peek() == '-' ? -1.0 : 1.0;
      ++pos_;
    }
    read_term(sign);
    while (true) {
      skip_space();
      if (at_end()) break;
      const char op = peek();
      if (op != '+' && op != '-') fail("expected '+' or '-'");
      ++pos_;
      read_term(op == '-' ? -1.0 : 1.0);
    }
    return poly_;
  }

 private:
  void read_term(double sign) {
    double coefficient = sign;
    std::vector<int> powers(nx_ + nu_, 0);
    read_factor(coefficient, powers);
    while (true) {
      skip_space();
      if (at_end() || peek() != '*') break;
      ++pos_;
      read_factor(coefficient, powers);
    }
    poly_.add_term(coefficient, std::move(powers));
  }

  void read_factor(double& coefficient, std::vector<int>& powers) {
    skip_space();
    if (at_end()) fail("unexpected end of polynomial");
    const char ch = peek();
    if (ch == 'x' || ch == 'u') {
      ++pos_;
      const int index = read_int();
      const int bound = ch == 'x' ? nx_ : nu_;
      if (index < 1 || index > bound) {
        fail(std::string("variable ") + ch + std::to_string(index) +
             " out of range");
      }
      int exponent = 1;
      skip_space();
      if (!at_end() && peek() == '^') {
        ++pos_;
        skip_space();
        exponent = read_int();
      }
      powers[(ch == 'x' ? 0 : nx_) + index - 1] += exponent;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
      std::size_t used = 0;
      const std::string rest(text_.substr(pos_));
      double number = 0.0;
      try {
        number = std::stod(rest, &used);
      } catch (const std::exception&) {
        fail("bad number");
      }
      pos_ += used;
      coefficient *= number;
      return;
    }
    fail(std::string("unexpected character '") + ch + "'");
  }

  int read_int() {
    const std::size_t begin = pos_;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
      ++pos_;
    }
    if (begin == pos_) fail("expected integer");
    return std::stoi(std::string(text_.substr(begin, pos_ - begin)));
  }

  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) {
      ++pos_;
    }
  }
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("polynomial '" + std::string(text_) + "' at column " +
                      std::to_string(pos_ + 1) + ": " + what);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int nx_;
  int nu_;
  Polynomial poly_;
};

}  // namespace

Polynomial Polynomial::parse(std::string_view text, int nx, int nu) {
  return PolynomialReader(text, nx, nu).read();
}

Polynomial& Polynomial::add_term(double coefficient, std::vector<int> powers) {
  if (static_cast<int>(powers.size()) != num_vars_) {
    throw std::invalid_argument("monomial has wrong number of exponents");
  }
  for (int p : powers) {
    if (p < 0) throw std::invalid_argument("negative exponent");
  }
  for (auto& term : terms_) {
    if (term.powers == powers) {
      term.coefficient += coefficient;
      return *this;
    }
  }
  terms_.push_back({coefficient, std::move(powers)});
  return *this;
}

int Polynomial::degree() const {
  int degree = 0;
  for (const auto& term : terms_) {
    int d = 0;
    for (int p : term.powers) d += p;
    degree = std::max(degree, d);
  }
  return degree;
}

double Polynomial::eval(const double* z) const {
  double sum = 0.0;
  for (const auto& term : terms_) {
    double v = term.coefficient;
    for (int i = 0; i < num_vars_; ++i) {
      if (term.powers[i] != 0) v *= ipow(z[i], term.powers[i]);
    }
    sum += v;
  }
  return sum;
}

void Polynomial::gradient(const double* z, double* out) const {
  for (int i = 0; i < num_vars_; ++i) out[i] = 0.0;
  for (const auto& term : terms_) {
    for (int i = 0; i < num_vars_; ++i) {
      const int pi = term.powers[i];
      if (pi == 0) continue;
      double v = term.coefficient * pi * ipow(z[i], pi - 1);
      for (int k = 0; k < num_vars_; ++k) {
        if (k != i && term.powers[k] != 0) v *= ipow(z[k], term.powers[k]);
      }
      out[i] += v;
    }
  }
}

void Polynomial::hessian(const double* z, double* out) const {
  const int n = num_vars_;
  for (int i = 0; i < n * n; ++i) out[i] = 0.0;
  for (const auto& term : terms_) {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        const int pi = term.powers[i];
        const int pj = term.powers[j];
        double v = term.coefficient;
        if (i == j) {
          if (pi < 2) continue;
          v *= pi * (pi - 1) * ipow(z[i], pi - 2);
        } else {
          if (pi == 0 || pj == 0) continue;
          v *= pi * pj * ipow(z[i], pi - 1) * ipow(z[j], pj - 1);
        }
        for (int k = 0; k < n; ++k) {
          if (k != i && k != j && term.powers[k] != 0) {
            v *= ipow(z[k], term.powers[k]);
          }
        }
        out[i + j * n] += v;
        if (i != j) out[j + i * n] += v;
      }
    }
  }
}

}  // namespace tcrisis
