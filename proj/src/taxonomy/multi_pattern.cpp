#include "taxonomy/multi_pattern.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "core/error.hpp"
#include "core/text.hpp"

namespace needscope::rx {

namespace {

using Op = NfaState::Op;

void sort_unique(std::vector<std::uint32_t>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

MultiPatternSet::MultiPatternSet(const std::vector<std::string>& patterns,
                                 std::size_t max_dfa_states)
    : pattern_count_(patterns.size()) {
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    nfa_.add_pattern(parse(patterns[i]).root, static_cast<std::uint32_t>(i));
  }
  if (pattern_count_ == 0) return;
  start_closure_ = closure(nfa_.starts());
  compute_byte_classes();
  dfa_ready_ = build_dfa(max_dfa_states);
  if (!dfa_ready_) {
    table_.clear();
    table_.shrink_to_fit();
    accept_sets_.clear();
  }
}

void MultiPatternSet::compute_byte_classes() {
  std::array<std::uint16_t, 256> cls{};
  std::vector<ByteSet> partitions = nfa_.byte_sets();
  ByteSet word;
  for (unsigned b = 0; b < 256; ++b) {
    if (is_word_byte(static_cast<unsigned char>(b))) word.set(b);
  }
  partitions.push_back(word);
  std::size_t count = 1;
  for (const auto& set : partitions) {
    std::map<std::pair<std::uint16_t, bool>, std::uint16_t> remap;
    for (unsigned b = 0; b < 256; ++b) {
      auto [it, inserted] =
          remap.try_emplace({cls[b], set.test(b)}, static_cast<std::uint16_t>(remap.size()));
      cls[b] = it->second;
    }
    count = remap.size();
  }
  class_count_ = count;
  class_rep_.assign(count, 0);
  std::vector<bool> seen(count, false);
  for (unsigned b = 0; b < 256; ++b) {
    byte_class_[b] = static_cast<std::uint8_t>(cls[b]);
    if (!seen[cls[b]]) {
      seen[cls[b]] = true;
      class_rep_[cls[b]] = static_cast<std::uint8_t>(b);
    }
  }
}

std::vector<std::uint32_t> MultiPatternSet::closure(std::vector<std::uint32_t> roots) const {
  const auto& states = nfa_.states();
  std::vector<bool> visited(states.size(), false);
  std::vector<std::uint32_t> out;
  while (!roots.empty()) {
    std::uint32_t id = roots.back();
    roots.pop_back();
    if (visited[id]) continue;
    visited[id] = true;
    const NfaState& s = states[id];
    switch (s.op) {
      case Op::kSplit:
        roots.push_back(s.out1);
        roots.push_back(s.out);
        break;
      case Op::kEmpty:
        roots.push_back(s.out);
        break;
      default:
        out.push_back(id);
    }
  }
  sort_unique(out);
  return out;
}

void MultiPatternSet::resolve(const std::vector<std::uint32_t>& set, Context ctx, bool next_word,
                              bool at_end, std::vector<std::uint32_t>& byte_states,
                              std::vector<std::uint32_t>& matches) const {
  const auto& states = nfa_.states();
  byte_states.clear();
  matches.clear();
  std::vector<bool> visited(states.size(), false);
  std::vector<std::uint32_t> stack(set.rbegin(), set.rend());
  while (!stack.empty()) {
    std::uint32_t id = stack.back();
    stack.pop_back();
    if (visited[id]) continue;
    visited[id] = true;
    const NfaState& s = states[id];
    switch (s.op) {
      case Op::kByte:
        byte_states.push_back(id);
        break;
      case Op::kMatch:
        matches.push_back(s.pattern);
        break;
      case Op::kSplit:
        stack.push_back(s.out1);
        stack.push_back(s.out);
        break;
      case Op::kEmpty:
        stack.push_back(s.out);
        break;
      case Op::kAssert: {
        bool holds = false;
        switch (s.assertion) {
          case Assertion::kBeginText: holds = ctx.at_start; break;
          case Assertion::kEndText: holds = at_end; break;
          case Assertion::kWordBoundary: holds = ctx.prev_word != next_word; break;
          case Assertion::kNotWordBoundary: holds = ctx.prev_word == next_word; break;
        }
        if (holds) stack.push_back(s.out);
        break;
      }
    }
  }
  sort_unique(byte_states);
  sort_unique(matches);
}

std::vector<std::uint32_t> MultiPatternSet::advance(const std::vector<std::uint32_t>& byte_states,
                                                    unsigned char byte) const {
  const auto& states = nfa_.states();
  const auto& sets = nfa_.byte_sets();
  std::vector<std::uint32_t> roots = nfa_.starts();
  for (std::uint32_t id : byte_states) {
    if (sets[states[id].byte_set].test(byte)) roots.push_back(states[id].out);
  }
  return closure(std::move(roots));
}

bool MultiPatternSet::build_dfa(std::size_t max_states) {
  const std::size_t width = class_count_ + 1;
  using Key = std::pair<std::uint8_t, std::vector<std::uint32_t>>;
  std::map<Key, std::uint32_t> index;
  std::vector<const Key*> keys;
  std::map<std::vector<std::uint32_t>, std::uint32_t> accept_index;
  accept_sets_.assign(1, {});
  accept_index.emplace(std::vector<std::uint32_t>{}, 0);

  auto intern_state = [&](std::uint8_t flags, std::vector<std::uint32_t> set) -> std::int64_t {
    auto [it, inserted] =
        index.try_emplace(Key{flags, std::move(set)}, static_cast<std::uint32_t>(keys.size()));
    if (inserted) {
      if (keys.size() >= max_states) return -1;
      keys.push_back(&it->first);
      table_.resize(keys.size() * width);
    }
    return it->second;
  };
  auto intern_accept = [&](const std::vector<std::uint32_t>& matches) -> std::uint32_t {
    auto [it, inserted] =
        accept_index.try_emplace(matches, static_cast<std::uint32_t>(accept_sets_.size()));
    if (inserted) accept_sets_.push_back(matches);
    return it->second;
  };

  constexpr std::uint8_t kAtStart = 1;
  constexpr std::uint8_t kPrevWord = 2;
  intern_state(kAtStart, start_closure_);

  std::vector<std::uint32_t> byte_states, matches;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const std::uint8_t flags = keys[i]->first;
    const std::vector<std::uint32_t> set = keys[i]->second;
    Context ctx{(flags & kAtStart) != 0, (flags & kPrevWord) != 0};
    for (std::size_t c = 0; c < class_count_; ++c) {
      unsigned char rep = class_rep_[c];
      bool word = is_word_byte(rep);
      resolve(set, ctx, word, false, byte_states, matches);
      std::int64_t next = intern_state(word ? kPrevWord : 0, advance(byte_states, rep));
      if (next < 0) return false;
      table_[i * width + c] = Transition{static_cast<std::uint32_t>(next), intern_accept(matches)};
    }
    resolve(set, ctx, false, true, byte_states, matches);
    table_[i * width + class_count_] = Transition{0, intern_accept(matches)};
  }
  state_count_ = keys.size();
  return true;
}

void MultiPatternSet::simulate(std::string_view text, std::span<std::uint8_t> hits) const {
  std::vector<std::uint32_t> set = start_closure_;
  std::vector<std::uint32_t> byte_states, matches;
  Context ctx{true, false};
  for (char ch : text) {
    auto b = static_cast<unsigned char>(ch);
    bool word = is_word_byte(b);
    resolve(set, ctx, word, false, byte_states, matches);
    for (std::uint32_t p : matches) hits[p] = 1;
    set = advance(byte_states, b);
    ctx = Context{false, word};
  }
  resolve(set, ctx, false, true, byte_states, matches);
  for (std::uint32_t p : matches) hits[p] = 1;
}

void MultiPatternSet::scan(std::string_view text, std::span<std::uint8_t> hits) const {
  if (pattern_count_ == 0) return;
  if (!dfa_ready_) {
    simulate(text, hits);
    return;
  }
  const std::size_t width = class_count_ + 1;
  const Transition* table = table_.data();
  std::uint32_t state = 0;
  for (char ch : text) {
    const Transition& t = table[state * width + byte_class_[static_cast<unsigned char>(ch)]];
    if (t.accept != 0) {
      for (std::uint32_t p : accept_sets_[t.accept]) hits[p] = 1;
    }
    state = t.next;
  }
  const Transition& end = table[state * width + class_count_];
  if (end.accept != 0) {
    for (std::uint32_t p : accept_sets_[end.accept]) hits[p] = 1;
  }
}

std::vector<std::uint32_t> MultiPatternSet::matching(std::string_view text) const {
  std::vector<std::uint8_t> hits(pattern_count_, 0);
  scan(text, hits);
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i]) out.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

}  // namespace needscope::rx
