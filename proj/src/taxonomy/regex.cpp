#include "taxonomy/regex.hpp"

#include <string>

#include "core/error.hpp"

namespace needscope::rx {

namespace {

constexpr std::size_t kMaxNfaStates = 200000;

ByteSet range_set(unsigned lo, unsigned hi) {
  ByteSet s;
  for (unsigned b = lo; b <= hi; ++b) s.set(b);
  return s;
}

const ByteSet& digit_set() {
  static const ByteSet s = range_set('0', '9');
  return s;
}

const ByteSet& word_set() {
  static const ByteSet s =
      range_set('a', 'z') | range_set('A', 'Z') | range_set('0', '9') | range_set('_', '_');
  return s;
}

const ByteSet& space_set() {
  static const ByteSet s = [] {
    ByteSet out;
    for (char c : std::string(" \t\n\v\f\r")) out.set(static_cast<unsigned char>(c));
    return out;
  }();
  return s;
}

ByteSet single(unsigned char c) {
  ByteSet s;
  s.set(c);
  return s;
}

bool is_ascii_letter(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
int hex_value(unsigned char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

class Parser {
 public:
  explicit Parser(std::string_view pattern) : text_(pattern) {}

  ParsedPattern run() {
    ParsedPattern out;
    out.root = parse_alternation();
    if (!eof()) fail("unmatched ')'");
    out.has_uppercase_literal = uppercase_;
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::kValidation,
                "invalid regex at offset " + std::to_string(pos_) + ": " + why);
  }

  bool eof() const { return pos_ >= text_.size(); }
  unsigned char peek() const { return static_cast<unsigned char>(text_[pos_]); }
  unsigned char take() {
    if (eof()) fail("unexpected end of pattern");
    return static_cast<unsigned char>(text_[pos_++]);
  }
  bool at_quantifier() const {
    if (eof()) return false;
    char c = text_[pos_];
    return c == '*' || c == '+' || c == '?' || c == '{';
  }

  void note_literal(unsigned char lo, unsigned char hi) {
    if (hi >= 'A' && lo <= 'Z') uppercase_ = true;
  }

  Node bytes_node(ByteSet set) {
    Node n;
    n.kind = Node::Kind::kBytes;
    n.bytes = set;
    return n;
  }

  Node assert_node(Assertion a) {
    Node n;
    n.kind = Node::Kind::kAssert;
    n.assertion = a;
    return n;
  }

  Node parse_alternation() {
    std::vector<Node> branches;
    branches.push_back(parse_concat());
    while (!eof() && peek() == '|') {
      ++pos_;
      branches.push_back(parse_concat());
    }
    if (branches.size() == 1) return std::move(branches.front());
    Node n;
    n.kind = Node::Kind::kAlternate;
    n.children = std::move(branches);
    return n;
  }

  Node parse_concat() {
    std::vector<Node> items;
    while (!eof() && peek() != '|' && peek() != ')') items.push_back(parse_repeat());
    if (items.empty()) return Node{};
    if (items.size() == 1) return std::move(items.front());
    Node n;
    n.kind = Node::Kind::kConcat;
    n.children = std::move(items);
    return n;
  }

  int parse_number() {
    if (eof() || !is_digit(peek())) fail("expected a repetition count");
    int value = 0;
    while (!eof() && is_digit(peek())) {
      value = value * 10 + (take() - '0');
      if (value > kMaxRepeat) fail("repetition count above " + std::to_string(kMaxRepeat));
    }
    return value;
  }

  Node parse_repeat() {
    Node atom = parse_atom();
    if (!at_quantifier()) return atom;
    if (atom.kind == Node::Kind::kAssert) fail("quantifier applied to an assertion");
    int min = 0, max = -1;
    switch (take()) {
      case '*': break;
      case '+': min = 1; break;
      case '?': max = 1; break;
      case '{': {
        min = parse_number();
        if (!eof() && peek() == ',') {
          ++pos_;
          max = (!eof() && peek() == '}') ? -1 : parse_number();
        } else {
          max = min;
        }
        if (eof() || take() != '}') fail("malformed {} quantifier");
        if (max != -1 && max < min) fail("quantifier range is reversed");
        break;
      }
    }
    if (!eof() && peek() == '?') ++pos_;  // lazy: same language
    if (at_quantifier()) fail("nested quantifier");
    Node n;
    n.kind = Node::Kind::kRepeat;
    n.min = min;
    n.max = max;
    n.children.push_back(std::move(atom));
    return n;
  }

  Node parse_atom() {
    unsigned char c = take();
    switch (c) {
      case '(': {
        if (!eof() && peek() == '?') {
          if (pos_ + 1 < text_.size() && text_[pos_ + 1] == ':') {
            pos_ += 2;
          } else {
            fail("lookaround and named groups are not supported");
          }
        }
        Node inner = parse_alternation();
        if (eof() || take() != ')') fail("missing ')'");
        return inner;
      }
      case ')': fail("unmatched ')'");
      case '[': return bytes_node(parse_class());
      case '.': {
        ByteSet all;
        all.set();
        all.reset('\n');
        all.reset('\r');
        return bytes_node(all);
      }
      case '^': return assert_node(Assertion::kBeginText);
      case '$': return assert_node(Assertion::kEndText);
      case '\\': return parse_escape();
      case '*':
      case '+':
      case '?': fail("nothing to repeat");
      case '{':
      case '}':
      case ']': fail(std::string("unescaped '") + static_cast<char>(c) + "'");
      default:
        note_literal(c, c);
        return bytes_node(single(c));
    }
  }

  // Single-byte escapes valid both inside and outside classes. Returns -1 if
  // `c` is not one of them.
  int simple_escape(unsigned char c) {
    switch (c) {
      case 't': return '\t';
      case 'n': return '\n';
      case 'r': return '\r';
      case 'f': return '\f';
      case 'v': return '\v';
      case 'x': {
        int hi = eof() ? -1 : hex_value(take());
        int lo = eof() ? -1 : hex_value(take());
        if (hi < 0 || lo < 0) fail("\\x needs two hex digits");
        return hi * 16 + lo;
      }
      default: break;
    }
    if (c < 0x80 && !is_ascii_letter(c) && !is_digit(c)) return c;
    return -1;
  }

  const ByteSet* class_escape(unsigned char c, ByteSet& storage) {
    switch (c) {
      case 'd': return &digit_set();
      case 'w': return &word_set();
      case 's': return &space_set();
      case 'D': storage = ~digit_set(); return &storage;
      case 'W': storage = ~word_set(); return &storage;
      case 'S': storage = ~space_set(); return &storage;
      default: return nullptr;
    }
  }

  Node parse_escape() {
    unsigned char c = take();
    if (c == 'b') return assert_node(Assertion::kWordBoundary);
    if (c == 'B') return assert_node(Assertion::kNotWordBoundary);
    ByteSet storage;
    if (const ByteSet* set = class_escape(c, storage)) return bytes_node(*set);
    if (is_digit(c)) fail("backreferences and octal escapes are not supported");
    int b = simple_escape(c);
    if (b < 0) fail(std::string("unsupported escape '\\") + static_cast<char>(c) + "'");
    return bytes_node(single(static_cast<unsigned char>(b)));
  }

  // One class member that can be a range endpoint; -1 for multi-byte escapes
  // (which are OR'ed into `set` directly).
  int class_atom(ByteSet& set) {
    unsigned char c = take();
    if (c == '\\') {
      unsigned char e = take();
      ByteSet storage;
      if (const ByteSet* s = class_escape(e, storage)) {
        set |= *s;
        return -1;
      }
      if (e == 'b') fail("\\b inside a class is not supported");
      if (is_digit(e)) fail("octal escapes are not supported");
      int b = simple_escape(e);
      if (b < 0) fail(std::string("unsupported escape '\\") + static_cast<char>(e) + "'");
      return b;
    }
    if (c == '[') fail("unescaped '[' inside a class");
    if (c >= 0x80) fail("non-ASCII byte inside a class");
    return c;
  }

  ByteSet parse_class() {
    bool negate = false;
    if (!eof() && peek() == '^') {
      negate = true;
      ++pos_;
    }
    ByteSet set;
    bool first = true;
    while (true) {
      if (eof()) fail("missing ']'");
      if (peek() == ']') {
        if (first) fail("empty class");
        ++pos_;
        break;
      }
      if (peek() == '-' && !first && pos_ + 1 < text_.size() && text_[pos_ + 1] != ']') {
        fail("ambiguous '-' inside a class");
      }
      int lo = class_atom(set);
      first = false;
      if (lo >= 0 && !eof() && peek() == '-' && pos_ + 1 < text_.size() &&
          text_[pos_ + 1] != ']') {
        ++pos_;
        int hi = class_atom(set);
        if (hi < 0) fail("class escape used as a range endpoint");
        if (hi < lo) fail("class range is reversed");
        note_literal(static_cast<unsigned char>(lo), static_cast<unsigned char>(hi));
        set |= range_set(static_cast<unsigned>(lo), static_cast<unsigned>(hi));
      } else if (lo >= 0) {
        note_literal(static_cast<unsigned char>(lo), static_cast<unsigned char>(lo));
        set.set(static_cast<unsigned>(lo));
      }
    }
    return negate ? ~set : set;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  bool uppercase_ = false;
};

}  // namespace

ParsedPattern parse(std::string_view pattern) { return Parser(pattern).run(); }

std::uint32_t Nfa::emit(NfaState s) {
  if (states_.size() >= kMaxNfaStates) {
    throw Error(ErrorCode::kValidation, "regex expands beyond the automaton size budget");
  }
  states_.push_back(s);
  return static_cast<std::uint32_t>(states_.size() - 1);
}

std::uint32_t Nfa::intern(const ByteSet& set) {
  auto [it, inserted] = byte_set_index_.try_emplace(set, static_cast<std::uint32_t>(byte_sets_.size()));
  if (inserted) byte_sets_.push_back(set);
  return it->second;
}

std::uint32_t Nfa::build(const Node& node, std::uint32_t next) {
  using Op = NfaState::Op;
  switch (node.kind) {
    case Node::Kind::kEmpty:
      return next;
    case Node::Kind::kBytes: {
      NfaState s;
      s.op = Op::kByte;
      s.byte_set = intern(node.bytes);
      s.out = next;
      return emit(s);
    }
    case Node::Kind::kAssert: {
      NfaState s;
      s.op = Op::kAssert;
      s.assertion = node.assertion;
      s.out = next;
      return emit(s);
    }
    case Node::Kind::kConcat: {
      std::uint32_t cur = next;
      for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) cur = build(*it, cur);
      return cur;
    }
    case Node::Kind::kAlternate: {
      std::uint32_t cur = build(node.children.back(), next);
      for (std::size_t i = node.children.size() - 1; i-- > 0;) {
        NfaState s;
        s.op = Op::kSplit;
        s.out = build(node.children[i], next);
        s.out1 = cur;
        cur = emit(s);
      }
      return cur;
    }
    case Node::Kind::kRepeat: {
      const Node& child = node.children.front();
      std::uint32_t cur = next;
      if (node.max == -1) {
        NfaState loop;
        loop.op = Op::kSplit;
        loop.out1 = next;
        std::uint32_t loop_id = emit(loop);
        std::uint32_t body = build(child, loop_id);
        states_[loop_id].out = body;
        cur = loop_id;
      } else {
        for (int i = 0; i < node.max - node.min; ++i) {
          NfaState opt;
          opt.op = Op::kSplit;
          opt.out = build(child, cur);
          opt.out1 = next;
          cur = emit(opt);
        }
      }
      for (int i = 0; i < node.min; ++i) cur = build(child, cur);
      return cur;
    }
  }
  return next;
}

std::uint32_t Nfa::add_pattern(const Node& root, std::uint32_t pattern_id) {
  NfaState match;
  match.op = NfaState::Op::kMatch;
  match.pattern = pattern_id;
  std::uint32_t start = build(root, emit(match));
  starts_.push_back(start);
  return start;
}

}  // namespace needscope::rx
