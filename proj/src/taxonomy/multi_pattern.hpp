#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "taxonomy/regex.hpp"

namespace needscope::rx {

// A set of patterns evaluated in one left-to-right pass, reporting which
// patterns match anywhere in the input (unanchored search semantics).
//
// The combined automaton is determinized eagerly at construction over byte
// equivalence classes. Assertions are resolved one byte late: a DFA state
// keeps the NFA states waiting on ^ $ \b \B together with "previous byte was a
// word byte" and "at start of text", and the transition on the next byte (or
// end of text) decides them. If determinization exceeds the state budget the
// set falls back to on-the-fly NFA simulation with identical results.
//
// Immutable after construction; scan() is safe to call concurrently.
class MultiPatternSet {
 public:
  MultiPatternSet() = default;
  // Throws Error(kValidation) for a pattern outside the dialect.
  explicit MultiPatternSet(const std::vector<std::string>& patterns,
                           std::size_t max_dfa_states = 1 << 16);

  std::size_t size() const { return pattern_count_; }

  // Sets hits[i] = 1 for every pattern i matching somewhere in `text`.
  // `hits` must hold size() entries; entries are never cleared.
  void scan(std::string_view text, std::span<std::uint8_t> hits) const;
  std::vector<std::uint32_t> matching(std::string_view text) const;

  bool deterministic() const { return dfa_ready_; }
  std::size_t dfa_state_count() const { return dfa_ready_ ? state_count_ : 0; }
  std::size_t byte_class_count() const { return class_count_; }

 private:
  struct Context {
    bool at_start;
    bool prev_word;
  };

  struct Transition {
    std::uint32_t next = 0;
    std::uint32_t accept = 0;  // index into accept_sets_, 0 = none
  };

  void compute_byte_classes();
  std::vector<std::uint32_t> closure(std::vector<std::uint32_t> roots) const;
  void resolve(const std::vector<std::uint32_t>& set, Context ctx, bool next_word, bool at_end,
               std::vector<std::uint32_t>& byte_states, std::vector<std::uint32_t>& matches) const;
  std::vector<std::uint32_t> advance(const std::vector<std::uint32_t>& byte_states,
                                     unsigned char byte) const;
  bool build_dfa(std::size_t max_states);
  void simulate(std::string_view text, std::span<std::uint8_t> hits) const;

  std::size_t pattern_count_ = 0;
  Nfa nfa_;
  std::vector<std::uint32_t> start_closure_;

  std::array<std::uint8_t, 256> byte_class_{};
  std::vector<std::uint8_t> class_rep_;
  std::size_t class_count_ = 0;

  bool dfa_ready_ = false;
  std::size_t state_count_ = 0;
  std::vector<Transition> table_;  // state * (class_count_ + 1); last column is end of text
  std::vector<std::vector<std::uint32_t>> accept_sets_;
};

}  // namespace needscope::rx
