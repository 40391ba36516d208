#pragma once

// Regular-expression dialect shared by all detector patterns: the subset of
// ECMAScript syntax with no backreferences and no lookaround, matched over
// bytes. Supported:
//
//   literals, escaped punctuation, \t \n \r \f \v \xHH
//   .  (any byte except \n and \r)
//   [...] [^...] with ASCII ranges and \d \w \s \D \W \S
//   \d \w \s \D \W \S
//   ^ $ \b \B
//   (...) (?:...) |
//   * + ? {n} {n,} {n,m}, each optionally followed by a lazy '?'
//
// Anything outside the subset is rejected at parse time, so every accepted
// pattern means the same thing to std::regex (ECMAScript) as it does here.

#include <bitset>
#include <cstdint>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace needscope::rx {

using ByteSet = std::bitset<256>;

enum class Assertion : std::uint8_t { kBeginText, kEndText, kWordBoundary, kNotWordBoundary };

struct Node {
  enum class Kind : std::uint8_t { kEmpty, kBytes, kConcat, kAlternate, kRepeat, kAssert };

  Kind kind = Kind::kEmpty;
  ByteSet bytes;
  Assertion assertion = Assertion::kBeginText;
  int min = 0;
  int max = -1;  // -1: unbounded
  std::vector<Node> children;
};

struct ParsedPattern {
  Node root;
  // True when a literal or class range names an ASCII uppercase letter. Input
  // text is lowercased before matching, so such a literal can never match.
  bool has_uppercase_literal = false;
};

inline constexpr int kMaxRepeat = 100;

// Throws Error(kValidation) naming the offset and the problem.
ParsedPattern parse(std::string_view pattern);

struct NfaState {
  enum class Op : std::uint8_t { kByte, kSplit, kEmpty, kAssert, kMatch };

  Op op = Op::kEmpty;
  Assertion assertion = Assertion::kBeginText;
  std::uint32_t out = 0;
  std::uint32_t out1 = 0;
  std::uint32_t byte_set = 0;
  std::uint32_t pattern = 0;
};

// Thompson automaton holding any number of patterns, each ending in its own
// kMatch state.
class Nfa {
 public:
  // Returns the pattern's start state. Throws Error(kValidation) if the
  // expansion exceeds the state budget.
  std::uint32_t add_pattern(const Node& root, std::uint32_t pattern_id);

  const std::vector<NfaState>& states() const { return states_; }
  const std::vector<ByteSet>& byte_sets() const { return byte_sets_; }
  const std::vector<std::uint32_t>& starts() const { return starts_; }

 private:
  std::uint32_t emit(NfaState s);
  std::uint32_t intern(const ByteSet& set);
  std::uint32_t build(const Node& node, std::uint32_t next);

  std::vector<NfaState> states_;
  std::vector<ByteSet> byte_sets_;
  std::unordered_map<ByteSet, std::uint32_t> byte_set_index_;
  std::vector<std::uint32_t> starts_;
};

}  // namespace needscope::rx
