#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "error.hpp"

namespace cirphylo {

struct Tree_node {
  int parent = -1;
  std::vector<int> children;
  double branch_length = 0.0;  // length of the branch above this node; 0 for the root
  std::string label;

  bool is_leaf() const noexcept { return children.empty(); }
};

// Rooted tree with branch lengths in time units.  Node 0 is the root and every
// parent precedes its children, so index order is a preorder.
class Tree {
 public:
  const std::vector<Tree_node>& nodes() const noexcept { return nodes_; }
  const Tree_node& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  int size() const noexcept { return static_cast<int>(nodes_.size()); }
  int root() const noexcept { return 0; }

  std::vector<int> leaves() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i) {
      if (nodes_[static_cast<std::size_t>(i)].is_leaf()) out.push_back(i);
    }
    return out;
  }

  std::optional<int> find_leaf(std::string_view label) const {
    for (int i = 0; i < size(); ++i) {
      const auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.is_leaf() && n.label == label) return i;
    }
    return std::nullopt;
  }

  // Root with exactly three children, all leaves.
  bool is_three_leaf_star() const {
    const auto& r = nodes_.front();
    if (r.children.size() != 3) return false;
    for (auto c : r.children) {
      if (!node(c).is_leaf()) return false;
    }
    return true;
  }

  void set_label(int i, std::string label) { nodes_.at(static_cast<std::size_t>(i)).label = std::move(label); }

  void set_branch_length(int i, double length) {
    if (!(length >= 0.0) || !std::isfinite(length)) throw Validation_error{"tree: branch lengths must be finite and >= 0"};
    auto& n = nodes_.at(static_cast<std::size_t>(i));
    if (n.parent >= 0) n.branch_length = length;
  }

  // Appends a node under `parent` (-1 for the root, which must come first).
  int add_node(int parent, double branch_length, std::string label = {}) {
    if (parent < 0 && !nodes_.empty()) throw Validation_error{"tree: root already exists"};
    if (parent >= size()) throw Validation_error{"tree: parent must precede child"};
    if (!(branch_length >= 0.0) || !std::isfinite(branch_length)) {
      throw Validation_error{"tree: branch lengths must be finite and >= 0"};
    }
    const int id = size();
    nodes_.push_back({.parent = parent, .children = {}, .branch_length = parent < 0 ? 0.0 : branch_length,
                      .label = std::move(label)});
    if (parent >= 0) nodes_[static_cast<std::size_t>(parent)].children.push_back(id);
    return id;
  }

 private:
  std::vector<Tree_node> nodes_;
};

namespace detail {

class Newick_parser {
 public:
  explicit Newick_parser(std::string_view text) : text_{text} {}

  Tree parse() {
    skip_blank();
    if (at_end()) fail("empty input");
    parse_subtree(-1);
    skip_blank();
    if (peek() == ':') {  // optional root length, ignored
      ++pos_;
      parse_length();
      skip_blank();
    }
    if (peek() != ';') fail("expected ';'");
    ++pos_;
    skip_blank();
    if (!at_end()) fail("trailing characters after ';'");
    return std::move(tree_);
  }

 private:
  void parse_subtree(int parent) {
    skip_blank();
    const auto start = pos_;
    const int id = tree_.add_node(parent, 0.0);
    if (peek() == '(') {
      ++pos_;
      for (;;) {
        parse_subtree(id);
        skip_blank();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        if (peek() == ')') {
          ++pos_;
          break;
        }
        fail(at_end() ? "unbalanced parentheses" : "expected ',' or ')'");
      }
      skip_blank();
      tree_.set_label(id, parse_label(false));
    } else {
      auto name = parse_label(true);
      if (!labels_.insert(name).second) fail("duplicate leaf label '" + name + "'", start);
      tree_.set_label(id, std::move(name));
    }

    if (parent < 0) return;
    skip_blank();
    if (peek() != ':') fail("missing branch length");
    ++pos_;
    tree_.set_branch_length(id, parse_length());
  }

  std::string parse_label(bool required) {
    std::string out;
    if (peek() == '\'') {
      ++pos_;
      for (;;) {
        if (at_end()) fail("unterminated quoted label");
        const char c = text_[pos_++];
        if (c == '\'') {
          if (peek() == '\'') {
            out.push_back('\'');
            ++pos_;
            continue;
          }
          break;
        }
        out.push_back(c);
      }
      return out;
    }
    while (!at_end()) {
      const char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == ',' || c == ':' || c == ';' ||
          c == '[' || c == '\'') {
        break;
      }
      out.push_back(c == '_' ? ' ' : c);
      ++pos_;
    }
    if (required && out.empty()) fail(at_end() ? "unexpected end of input" : "expected a leaf label");
    return out;
  }

  double parse_length() {
    skip_blank();
    const auto begin = text_.data() + pos_;
    const auto end = text_.data() + text_.size();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr == begin) fail("expected a branch length");
    pos_ += static_cast<std::size_t>(ptr - begin);
    if (!(value >= 0.0) || !std::isfinite(value)) {
      fail("branch length must be finite and >= 0", static_cast<std::size_t>(begin - text_.data()));
    }
    return value;
  }

  void skip_blank() {
    while (!at_end()) {
      const char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '[') {  // comment
        const auto close = text_.find(']', pos_);
        if (close == std::string_view::npos) fail("unterminated comment");
        pos_ = close + 1;
      } else {
        break;
      }
    }
  }

  bool at_end() const noexcept { return pos_ >= text_.size(); }
  char peek() const noexcept { return at_end() ? '\0' : text_[pos_]; }

  [[noreturn]] void fail(const std::string& what) const { fail(what, pos_); }
  [[noreturn]] void fail(const std::string& what, std::size_t where) const {
    throw Parse_error{"newick: " + what, where};
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Tree tree_;
  std::unordered_set<std::string> labels_;
};

inline void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

inline void append_label(std::string& out, const std::string& label) {
  const bool plain = label.find_first_of("()[]',:; _\t\n") == std::string::npos;
  if (plain) {
    out += label;
    return;
  }
  out.push_back('\'');
  for (char c : label) {
    if (c == '\'') out.push_back('\'');
    out.push_back(c);
  }
  out.push_back('\'');
}

inline void write_subtree(const Tree& tree, int id, std::string& out) {
  const auto& n = tree.node(id);
  if (!n.is_leaf()) {
    out.push_back('(');
    for (std::size_t k = 0; k < n.children.size(); ++k) {
      if (k > 0) out.push_back(',');
      write_subtree(tree, n.children[k], out);
    }
    out.push_back(')');
  }
  append_label(out, n.label);
  if (n.parent >= 0) {
    out.push_back(':');
    append_number(out, n.branch_length);
  }
}

}  // namespace detail

/// Parses a Newick string.  Every non-root node needs a branch length; leaf
/// labels must be unique.  Underscores in unquoted labels read as spaces.
inline Tree parse_newick(std::string_view text) { return detail::Newick_parser{text}.parse(); }

inline std::string to_newick(const Tree& tree) {
  std::string out;
  if (tree.size() > 0) detail::write_subtree(tree, tree.root(), out);
  out.push_back(';');
  return out;
}

}  // namespace cirphylo
