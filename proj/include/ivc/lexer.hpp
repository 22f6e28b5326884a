#pragma once

#include <string>
#include <vector>

#include "ivc/diag.hpp"
#include "ivc/value.hpp"

namespace ivc {

// Shared tokenizer for the contract and invariant languages: identifiers,
// integer literals, and a fixed set of punctuation/operators. '#' starts a
// comment running to end of line.
struct Token {
  enum class Kind { Ident, Int, Punct, End };
  Kind kind;
  std::string text;  // identifier name or punct spelling
  Value value;       // Int
  SourcePos pos;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) { tokenize(text); }

  const Token& peek(int ahead = 0) const {
    size_t i = idx_ + static_cast<size_t>(ahead);
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  Token next() {
    Token t = peek();
    if (idx_ < toks_.size() - 1) ++idx_;
    return t;
  }
  bool at_end() const { return peek().kind == Token::Kind::End; }

  bool is_punct(const std::string& p, int ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == Token::Kind::Punct && t.text == p;
  }
  bool is_ident(const std::string& name, int ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == Token::Kind::Ident && t.text == name;
  }
  bool accept_punct(const std::string& p) {
    if (!is_punct(p)) return false;
    next();
    return true;
  }
  bool accept_ident(const std::string& name) {
    if (!is_ident(name)) return false;
    next();
    return true;
  }
  void expect_punct(const std::string& p) {
    if (!accept_punct(p)) fail("expected '" + p + "'");
  }
  void expect_keyword(const std::string& name) {
    if (!accept_ident(name)) fail("expected '" + name + "'");
  }
  std::string expect_ident() {
    if (peek().kind != Token::Kind::Ident) fail("expected identifier");
    return next().text;
  }
  Value expect_int() {
    if (peek().kind != Token::Kind::Int) fail("expected integer literal");
    return next().value;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    std::string got = t.kind == Token::Kind::End ? "end of input"
                      : t.kind == Token::Kind::Int ? t.value.str()
                                                   : "'" + t.text + "'";
    throw ParseError("SyntaxError", msg + ", got " + got, t.pos);
  }

 private:
  void tokenize(const std::string& text) {
    int line = 1, col = 1;
    size_t i = 0;
    auto advance = [&](size_t n) {
      for (size_t k = 0; k < n; ++k) {
        if (text[i + k] == '\n') {
          ++line;
          col = 1;
        } else {
          ++col;
        }
      }
      i += n;
    };
    while (i < text.size()) {
      char c = text[i];
      if (c == '#') {
        size_t j = i;
        while (j < text.size() && text[j] != '\n') ++j;
        advance(j - i);
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance(1);
        continue;
      }
      SourcePos pos{line, col};
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t j = i;
        while (j < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
          ++j;
        toks_.push_back({Token::Kind::Ident, text.substr(i, j - i), 0, pos});
        advance(j - i);
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c))) {
        size_t j = i;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
        Token t{Token::Kind::Int, "", Value(text.substr(i, j - i)), pos};
        toks_.push_back(t);
        advance(j - i);
        continue;
      }
      // Two-char operators first.
      static const char* two[] = {"==", "!=", "<=", ">=", "&&"};
      bool matched = false;
      for (const char* op : two) {
        if (text.compare(i, 2, op) == 0) {
          toks_.push_back({Token::Kind::Punct, op, 0, pos});
          advance(2);
          matched = true;
          break;
        }
      }
      if (matched) continue;
      static const std::string single = "+-*/<>=,;:()[]{}^%!|&";
      if (single.find(c) != std::string::npos) {
        toks_.push_back({Token::Kind::Punct, std::string(1, c), 0, pos});
        advance(1);
        continue;
      }
      throw ParseError("SyntaxError", std::string("unexpected character '") + c + "'", pos);
    }
    toks_.push_back({Token::Kind::End, "", 0, {line, col}});
  }

  std::vector<Token> toks_;
  size_t idx_ = 0;
};

}  // namespace ivc
