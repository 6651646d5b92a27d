#include "jetfrob/parse.hpp"

#include <cctype>
#include <stdexcept>

namespace jetfrob {

namespace {

struct Parser {
  Universe* u;
  const std::string& s;
  size_t i = 0;

  void skip() {
    while (i < s.size() && std::isspace((unsigned char)s[i])) ++i;
  }
  bool eat(char c) {
    skip();
    if (i < s.size() && s[i] == c) {
      ++i;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg) {
    throw std::runtime_error("parse error at position " + std::to_string(i) + ": " + msg +
                             " in \"" + s + "\"");
  }

  Expr parse_sum() {
    Expr e = parse_product();
    while (true) {
      skip();
      if (eat('+'))
        e = e + parse_product();
      else if (eat('-'))
        e = e - parse_product();
      else
        return e;
    }
  }

  Expr parse_product() {
    Expr e = parse_power();
    while (true) {
      skip();
      if (eat('*'))
        e = e * parse_power();
      else if (eat('/'))
        e = e / parse_power();
      else
        return e;
    }
  }

  Expr parse_power() {
    skip();
    if (eat('-')) return -parse_power();
    Expr base = parse_primary();
    skip();
    if (eat('^')) {
      skip();
      bool neg = eat('-');
      if (i >= s.size() || !std::isdigit((unsigned char)s[i])) fail("integer exponent expected");
      long e = 0;
      while (i < s.size() && std::isdigit((unsigned char)s[i])) e = e * 10 + (s[i++] - '0');
      return base.pow(neg ? -(int)e : (int)e);
    }
    return base;
  }

  Expr parse_primary() {
    skip();
    if (i >= s.size()) fail("unexpected end of input");
    if (eat('(')) {
      Expr e = parse_sum();
      if (!eat(')')) fail("')' expected");
      return e;
    }
    char c = s[i];
    if (std::isdigit((unsigned char)c)) {
      std::string digits;
      while (i < s.size() && std::isdigit((unsigned char)s[i])) digits += s[i++];
      return Expr(u, Rat(mpz_class(digits)));
    }
    if (std::isalpha((unsigned char)c) || c == '_') {
      std::string name;
      while (i < s.size() &&
             (std::isalnum((unsigned char)s[i]) || s[i] == '_')) name += s[i++];
      SymId sym = u->lookup(name);
      if (sym == kNoSym) fail("unknown symbol '" + name + "'");
      return Expr(u, sym);
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

}  // namespace

Expr parse_expr(Universe* u, const std::string& text) {
  Parser p{u, text};
  Expr e = p.parse_sum();
  p.skip();
  if (p.i != text.size()) p.fail("trailing input");
  return e;
}

}  // namespace jetfrob
