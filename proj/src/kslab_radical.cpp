// Copyright 2026 The qfv authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qfv/kslab.hpp"

#include <boost/multiprecision/mpfr.hpp>
#include <cctype>
#include <memory>
#include <string>
#include <utility>

namespace qfv {

SyntaxError::SyntaxError(const std::string& what, int position)
    : Error(what + " at offset " + std::to_string(position)), pos(position) {}

namespace {

using Big = boost::multiprecision::mpfr_float_50;

// Expression tree kept only long enough to evaluate once and reprint.
struct Node {
  enum Kind { kNum, kAdd, kSub, kMul, kDiv, kNeg, kSqrt };
  Kind kind;
  std::string literal;
  std::unique_ptr<Node> a;
  std::unique_ptr<Node> b;
  Big val;
};

using NodePtr = std::unique_ptr<Node>;

int precedence(Node::Kind k) {
  switch (k) {
    case Node::kAdd:
    case Node::kSub:
      return 1;
    case Node::kMul:
    case Node::kDiv:
      return 2;
    case Node::kNeg:
      return 3;
    default:
      return 4;
  }
}

void print_node(const Node& n, int parent_prec, bool right_side,
                std::string* out) {
  int prec = precedence(n.kind);
  bool parens = prec < parent_prec || (prec == parent_prec && right_side);
  switch (n.kind) {
    case Node::kNum:
      out->append(n.literal);
      return;
    case Node::kSqrt:
      out->append("sqrt(");
      print_node(*n.a, 0, false, out);
      out->push_back(')');
      return;
    case Node::kNeg:
      if (parens) out->push_back('(');
      out->push_back('-');
      print_node(*n.a, prec, true, out);
      if (parens) out->push_back(')');
      return;
    default:
      break;
  }
  if (parens) out->push_back('(');
  print_node(*n.a, prec, false, out);
  switch (n.kind) {
    case Node::kAdd: out->push_back('+'); break;
    case Node::kSub: out->push_back('-'); break;
    case Node::kMul: out->push_back('*'); break;
    case Node::kDiv: out->push_back('/'); break;
    default: break;
  }
  print_node(*n.b, prec, true, out);
  if (parens) out->push_back(')');
}

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  NodePtr run() {
    NodePtr root = expr();
    skip_space();
    if (p_ < s_.size()) {
      throw SyntaxError("unexpected character '" + std::string(1, s_[p_]) + "'",
                        static_cast<int>(p_));
    }
    return root;
  }

 private:
  void skip_space() {
    while (p_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[p_]))) {
      ++p_;
    }
  }

  char peek() {
    skip_space();
    return p_ < s_.size() ? s_[p_] : '\0';
  }

  // True when the upcoming token can begin a primary: that is where
  // implicit multiplication applies, as in 2(5+sqrt(5)) or 2sqrt(5).
  bool at_primary_start() {
    char c = peek();
    return std::isdigit(static_cast<unsigned char>(c)) || c == '(' || c == 's';
  }

  NodePtr expr() {
    NodePtr left = term();
    while (true) {
      char c = peek();
      if (c != '+' && c != '-') return left;
      ++p_;
      NodePtr right = term();
      left = binary(c == '+' ? Node::kAdd : Node::kSub, std::move(left),
                    std::move(right));
    }
  }

  NodePtr term() {
    NodePtr left = factor();
    while (true) {
      char c = peek();
      if (c == '*' || c == '/') {
        ++p_;
        size_t at = p_;
        NodePtr right = factor();
        left = binary(c == '*' ? Node::kMul : Node::kDiv, std::move(left),
                      std::move(right), at);
      } else if (at_primary_start()) {
        NodePtr right = factor();
        left = binary(Node::kMul, std::move(left), std::move(right));
      } else {
        return left;
      }
    }
  }

  NodePtr factor() {
    if (peek() == '-') {
      ++p_;
      NodePtr inner = factor();
      auto n = std::make_unique<Node>();
      n->kind = Node::kNeg;
      n->val = -inner->val;
      n->a = std::move(inner);
      return n;
    }
    return primary();
  }

  NodePtr primary() {
    char c = peek();
    size_t at = p_;
    if (std::isdigit(static_cast<unsigned char>(c))) return number();
    if (c == '(') {
      ++p_;
      NodePtr inner = expr();
      expect(')');
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::string word;
      while (p_ < s_.size() &&
             std::isalpha(static_cast<unsigned char>(s_[p_]))) {
        word.push_back(s_[p_++]);
      }
      if (word != "sqrt") {
        throw SyntaxError("unknown name '" + word + "'", static_cast<int>(at));
      }
      expect('(');
      NodePtr inner = expr();
      expect(')');
      if (inner->val < 0) {
        throw DomainError("square root of negative value at offset " +
                          std::to_string(at));
      }
      auto n = std::make_unique<Node>();
      n->kind = Node::kSqrt;
      n->val = sqrt(inner->val);
      n->a = std::move(inner);
      return n;
    }
    throw SyntaxError(c == '\0' ? std::string("unexpected end of expression")
                                : "unexpected character '" + std::string(1, c) +
                                      "'",
                      static_cast<int>(p_));
  }

  NodePtr number() {
    size_t start = p_;
    while (p_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p_]))) {
      ++p_;
    }
    if (p_ < s_.size() && s_[p_] == '.') {
      ++p_;
      if (p_ >= s_.size() ||
          !std::isdigit(static_cast<unsigned char>(s_[p_]))) {
        throw SyntaxError("digit expected after decimal point",
                          static_cast<int>(p_));
      }
      while (p_ < s_.size() &&
             std::isdigit(static_cast<unsigned char>(s_[p_]))) {
        ++p_;
      }
    }
    auto n = std::make_unique<Node>();
    n->kind = Node::kNum;
    n->literal = s_.substr(start, p_ - start);
    n->val = Big(n->literal);
    return n;
  }

  NodePtr binary(Node::Kind kind, NodePtr left, NodePtr right,
                 size_t div_at = 0) {
    auto n = std::make_unique<Node>();
    n->kind = kind;
    switch (kind) {
      case Node::kAdd: n->val = left->val + right->val; break;
      case Node::kSub: n->val = left->val - right->val; break;
      case Node::kMul: n->val = left->val * right->val; break;
      case Node::kDiv:
        if (right->val == 0) {
          throw DomainError("division by zero at offset " +
                            std::to_string(div_at));
        }
        n->val = left->val / right->val;
        break;
      default: break;
    }
    n->a = std::move(left);
    n->b = std::move(right);
    return n;
  }

  void expect(char c) {
    if (peek() != c) {
      throw SyntaxError("'" + std::string(1, c) + "' expected",
                        static_cast<int>(p_));
    }
    ++p_;
  }

  const std::string& s_;
  size_t p_ = 0;
};

}  // namespace

RadicalExpr parse_radical(const std::string& text) {
  Parser parser(text);
  NodePtr root = parser.run();
  RadicalExpr out;
  out.text = text;
  print_node(*root, 0, false, &out.printed);
  out.value = static_cast<double>(root->val);
  out.digits = root->val.str(40);
  return out;
}

}  // namespace qfv
