#include "traylab/scene_dsl.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "traylab/errors.hpp"
#include "traylab/format.hpp"

namespace traylab {

PhysicsParams default_tray_physics() { return {0.1, 0.1, 0.0, 20.0, 0.5}; }

SceneLayout SceneProgram::layout() const {
  SceneLayout layout;
  layout.entries.reserve(declarations.size());
  for (const auto& d : declarations) layout.entries.push_back({d.object_id, d.cls, d.cell, d.color});
  return layout;
}

SceneProgram make_program(const SceneLayout& layout, const ClassParamMap& params, Vec2 pusher_start) {
  SceneProgram program;
  program.pusher_start = {pusher_start.x, pusher_start.y, 0.05};
  for (const auto& e : layout.entries) {
    auto it = params.find(e.cls);
    if (it == params.end()) {
      throw StructuralError("no physics parameters for class " + std::string(to_string(e.cls)));
    }
    program.declarations.push_back({e.object_id, e.cls, e.cell, e.color, {it->second, {}}});
  }
  std::stable_sort(program.declarations.begin(), program.declarations.end(),
                   [](const ObjectDecl& a, const ObjectDecl& b) { return a.object_id < b.object_id; });
  return program;
}

namespace {

// ---------------------------------------------------------------------------
// Fence extraction and statement assembly

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  }
  return lines;
}

// Drops a trailing '#' comment that is outside string literals.
std::string_view strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote != 0) {
      if (c == '\\') ++i;
      else if (c == quote) quote = 0;
    } else if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

int bracket_delta(std::string_view line) {
  int depth = 0;
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote != 0) {
      if (c == '\\') ++i;
      else if (c == quote) quote = 0;
      continue;
    }
    if (c == '\'' || c == '"') quote = c;
    else if (c == '(' || c == '[' || c == '{') ++depth;
    else if (c == ')' || c == ']' || c == '}') --depth;
  }
  return depth;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::size_t skip_ident(std::string_view s, std::size_t i) {
  if (i >= s.size() || !is_ident_start(s[i])) return std::string_view::npos;
  while (i < s.size() && is_ident_char(s[i])) ++i;
  return i;
}

std::size_t skip_space(std::string_view s, std::size_t i) {
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  return i;
}

enum class StatementKind { none, dict_assignment, create_call };

StatementKind classify(std::string_view line) {
  std::size_t i = skip_ident(line, 0);
  if (i == std::string_view::npos) return StatementKind::none;
  i = skip_space(line, i);
  if (i < line.size() && line[i] == '=') {
    i = skip_space(line, i + 1);
    return (i < line.size() && line[i] == '{') ? StatementKind::dict_assignment : StatementKind::none;
  }
  if (i < line.size() && line[i] == '.') {
    const std::size_t name_start = skip_space(line, i + 1);
    const std::size_t name_end = skip_ident(line, name_start);
    if (name_end == std::string_view::npos) return StatementKind::none;
    const auto method = line.substr(name_start, name_end - name_start);
    const std::size_t paren = skip_space(line, name_end);
    if (paren < line.size() && line[paren] == '(' &&
        (method == "create_pusher" || method == "create_tray" || method == "create_object")) {
      return StatementKind::create_call;
    }
  }
  return StatementKind::none;
}

struct Statement {
  StatementKind kind;
  std::string text;
  int line;
};

std::vector<Statement> assemble_statements(std::string_view program_text) {
  constexpr std::size_t kMaxStatementLines = 400;
  const auto lines = split_lines(program_text);
  std::vector<Statement> statements;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto first = trim(strip_comment(lines[i]));
    const auto kind = classify(first);
    if (kind == StatementKind::none) continue;

    Statement st{kind, std::string(first), static_cast<int>(i + 1)};
    int depth = bracket_delta(first);
    std::size_t j = i;
    while (depth > 0) {
      ++j;
      if (j >= lines.size() || j - i > kMaxStatementLines) {
        throw ParseError("unterminated statement '" + std::string(first.substr(0, 60)) + "'", st.line);
      }
      const auto cont = trim(strip_comment(lines[j]));
      st.text += ' ';
      st.text += cont;
      depth += bracket_delta(cont);
    }
    i = j;
    statements.push_back(std::move(st));
  }
  return statements;
}

// ---------------------------------------------------------------------------
// Literal parsing

enum class TokenKind { ident, number, string, punct, end };

struct Token {
  TokenKind kind;
  std::string text;  // identifier name, number text, unquoted string, or punct char
  std::size_t begin;
  std::size_t end;
};

class Tokenizer {
 public:
  Tokenizer(std::string_view src, int line) : src_(src), line_(line) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    std::size_t i = 0;
    while (true) {
      i = skip_space(src_, i);
      if (i >= src_.size()) break;
      const char c = src_[i];
      if (is_ident_start(c)) {
        const std::size_t e = skip_ident(src_, i);
        out.push_back({TokenKind::ident, std::string(src_.substr(i, e - i)), i, e});
        i = e;
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 ((c == '-' || c == '+' || c == '.') && i + 1 < src_.size() &&
                  (std::isdigit(static_cast<unsigned char>(src_[i + 1])) || src_[i + 1] == '.'))) {
        std::size_t e = i + 1;
        while (e < src_.size()) {
          const char d = src_[e];
          if (std::isdigit(static_cast<unsigned char>(d)) || d == '.') {
            ++e;
          } else if ((d == 'e' || d == 'E') && e + 1 < src_.size()) {
            ++e;
            if (src_[e] == '-' || src_[e] == '+') ++e;
          } else {
            break;
          }
        }
        out.push_back({TokenKind::number, std::string(src_.substr(i, e - i)), i, e});
        i = e;
      } else if (c == '\'' || c == '"') {
        std::string value;
        std::size_t e = i + 1;
        bool closed = false;
        while (e < src_.size()) {
          if (src_[e] == '\\' && e + 1 < src_.size()) {
            value += src_[e + 1];
            e += 2;
            continue;
          }
          if (src_[e] == c) {
            closed = true;
            ++e;
            break;
          }
          value += src_[e++];
        }
        if (!closed) throw ParseError("unterminated string literal", line_);
        out.push_back({TokenKind::string, std::move(value), i, e});
        i = e;
      } else if (std::string_view("(){}[],:=.").find(c) != std::string_view::npos) {
        out.push_back({TokenKind::punct, std::string(1, c), i, i + 1});
        ++i;
      } else {
        throw ParseError(std::string("unparseable attribute literal near '") + std::string(src_.substr(i, 20)) + "'",
                         line_);
      }
    }
    out.push_back({TokenKind::end, "", src_.size(), src_.size()});
    return out;
  }

 private:
  std::string_view src_;
  int line_;
};

struct Value {
  enum class Kind { number, string, ident, tuple, list, dict } kind = Kind::number;
  double number = 0.0;
  std::string text;  // string contents or identifier
  std::string raw;   // source slice
  std::vector<Value> items;
  std::vector<std::pair<std::string, Value>> entries;
};

class LiteralParser {
 public:
  LiteralParser(std::string_view src, std::vector<Token> tokens, int line)
      : src_(src), tokens_(std::move(tokens)), line_(line) {}

  const Token& peek(std::size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  const Token& next() { return tokens_[std::min(pos_++, tokens_.size() - 1)]; }
  bool at_punct(char c, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == TokenKind::punct && t.text[0] == c;
  }
  void expect_punct(char c) {
    if (!at_punct(c)) fail(std::string("expected '") + c + "'");
  }
  void expect_end() {
    if (peek().kind != TokenKind::end) fail("unexpected trailing text");
  }

  [[noreturn]] void fail(const std::string& what) const {
    const Token& t = peek();
    const std::string near = t.kind == TokenKind::end ? "end of statement" : "'" + t.text + "'";
    throw ParseError("unparseable attribute literal: " + what + " near " + near, line_);
  }

  Value value() {
    const Token& t = peek();
    const std::size_t begin = t.begin;
    Value v;
    switch (t.kind) {
      case TokenKind::number: {
        v.kind = Value::Kind::number;
        v.number = to_double(t.text);
        next();
        break;
      }
      case TokenKind::string:
        v.kind = Value::Kind::string;
        v.text = t.text;
        next();
        break;
      case TokenKind::ident:
        v.kind = Value::Kind::ident;
        v.text = t.text;
        next();
        break;
      case TokenKind::punct:
        if (at_punct('(')) {
          v.kind = Value::Kind::tuple;
          v.items = sequence(')');
        } else if (at_punct('[')) {
          v.kind = Value::Kind::list;
          v.items = sequence(']');
        } else if (at_punct('{')) {
          v.kind = Value::Kind::dict;
          dict_body(v);
        } else {
          fail("expected a literal");
        }
        break;
      case TokenKind::end:
        fail("expected a literal");
    }
    // Literals only: anything but a separator or closer after a value is an expression.
    const Token& after = peek();
    if (after.kind != TokenKind::end &&
        !(after.kind == TokenKind::punct && std::string_view(",)]}").find(after.text[0]) != std::string_view::npos)) {
      fail("expressions are not supported");
    }
    v.raw = std::string(trim(src_.substr(begin, peek().begin - begin)));
    return v;
  }

  std::vector<Value> sequence(char close) {
    next();  // opener
    std::vector<Value> items;
    while (!at_punct(close)) {
      items.push_back(value());
      if (at_punct(',')) next();
      else if (!at_punct(close)) fail(std::string("expected ',' or '") + close + "'");
    }
    next();
    return items;
  }

  void dict_body(Value& v) {
    next();  // '{'
    while (!at_punct('}')) {
      const Token& key = peek();
      if (key.kind != TokenKind::string && key.kind != TokenKind::ident) fail("expected a dictionary key");
      std::string name = key.text;
      next();
      expect_punct(':');
      next();
      v.entries.emplace_back(std::move(name), value());
      if (at_punct(',')) next();
      else if (!at_punct('}')) fail("expected ',' or '}'");
    }
    next();
  }

  double to_double(const std::string& text) const {
    double out = 0.0;
    const char* b = text.data();
    const char* e = text.data() + text.size();
    if (*b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, out);
    if (ec != std::errc{} || ptr != e) throw ParseError("malformed number '" + text + "'", line_);
    return out;
  }

 private:
  std::string_view src_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  int line_;
};

// ---------------------------------------------------------------------------
// Program construction

struct CallArgs {
  std::vector<Value> positional;
  std::map<std::string, Value> keyword;

  const Value* get(const std::string& key, std::size_t position) const {
    if (auto it = keyword.find(key); it != keyword.end()) return &it->second;
    if (position < positional.size()) return &positional[position];
    return nullptr;
  }
};

class ProgramBuilder {
 public:
  explicit ProgramBuilder(std::vector<std::string>* warnings) : warnings_(warnings) {}

  void apply(const Statement& st) {
    Tokenizer tokenizer(st.text, st.line);
    LiteralParser p(st.text, tokenizer.run(), st.line);
    line_ = st.line;
    label_ = std::string(st.text.substr(0, std::min<std::size_t>(st.text.size(), 48)));

    if (st.kind == StatementKind::dict_assignment) {
      const std::string name = p.next().text;
      p.next();  // '='
      Value dict = p.value();
      p.expect_end();
      dictionaries_[name] = std::move(dict);
      return;
    }

    p.next();  // receiver
    p.next();  // '.'
    const std::string method = p.next().text;
    p.expect_punct('(');
    p.next();
    CallArgs args;
    while (!p.at_punct(')')) {
      if (p.peek().kind == TokenKind::ident && p.at_punct('=', 1)) {
        const std::string key = p.next().text;
        p.next();
        args.keyword[key] = p.value();
      } else {
        args.positional.push_back(p.value());
      }
      if (p.at_punct(',')) p.next();
      else if (!p.at_punct(')')) p.fail("expected ',' or ')'");
    }
    p.next();
    p.expect_end();

    if (method == "create_pusher") pusher(args);
    else if (method == "create_tray") tray(args);
    else object(args);
  }

  SceneProgram finish() {
    if (!has_tray_) throw ParseError("program has no create_tray statement", 0);
    if (!has_pusher_) warn("program has no create_pusher statement; using the default start location");
    std::stable_sort(program_.declarations.begin(), program_.declarations.end(),
                     [](const ObjectDecl& a, const ObjectDecl& b) { return a.object_id < b.object_id; });
    return std::move(program_);
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what + " in statement '" + label_ + "'", line_);
  }

  void warn(const std::string& what) {
    if (warnings_ != nullptr) warnings_->push_back(what);
  }

  void pusher(const CallArgs& args) {
    std::vector<double> coords;
    if (args.positional.size() == 1 && args.positional[0].kind == Value::Kind::string) {
      std::istringstream in(args.positional[0].text);
      double v = 0.0;
      while (in >> v) coords.push_back(v);
      if (!in.eof()) fail("create_pusher location must be three numbers");
    } else {
      for (const auto& v : args.positional) {
        if (v.kind != Value::Kind::number) fail("create_pusher location must be three numbers");
        coords.push_back(v.number);
      }
    }
    if (coords.size() != 3) fail("create_pusher location must be three numbers");
    program_.pusher_start = {coords[0], coords[1], coords[2]};
    has_pusher_ = true;
  }

  const Value& physics_dict(const Value* v) const {
    if (v == nullptr) fail("missing object_physics");
    if (v->kind == Value::Kind::dict) return *v;
    if (v->kind == Value::Kind::ident) {
      auto it = dictionaries_.find(v->text);
      if (it == dictionaries_.end()) fail("undefined physics dictionary '" + v->text + "'");
      return it->second;
    }
    fail("object_physics must be a dictionary");
  }

  PhysicsBlock physics_block(const Value& dict, const PhysicsParams& defaults, bool require_all) const {
    PhysicsBlock block{defaults, {}};
    std::set<std::string> seen;
    for (const auto& [key, value] : dict.entries) {
      double* slot = nullptr;
      std::string canonical = key;
      if (key == "sliding-friction" || key == "sliding_friction") {
        slot = &block.params.sliding_friction;
        canonical = "sliding-friction";
      } else if (key == "armature") {
        slot = &block.params.armature;
      } else if (key == "stiffness") {
        slot = &block.params.stiffness;
      } else if (key == "damping") {
        slot = &block.params.damping;
      } else if (key == "mass") {
        slot = &block.params.mass;
      }
      if (slot == nullptr) {
        block.extras.push_back({key, value.raw});
        continue;
      }
      if (value.kind != Value::Kind::number) fail("attribute '" + key + "' must be a number");
      *slot = value.number;
      seen.insert(canonical);
    }
    if (require_all) {
      for (const char* k : {"sliding-friction", "armature", "stiffness", "damping"}) {
        if (!seen.contains(k)) fail(std::string("physics dictionary lacks '") + k + "'");
      }
    }
    return block;
  }

  void tray(const CallArgs& args) {
    program_.tray = physics_block(physics_dict(args.get("object_physics", 0)), default_tray_physics(), false);
    has_tray_ = true;
  }

  std::string string_arg(const CallArgs& args, const std::string& key, std::size_t pos) const {
    const Value* v = args.get(key, pos);
    if (v == nullptr) fail("missing " + key);
    if (v->kind != Value::Kind::string && v->kind != Value::Kind::ident) fail(key + " must be a string");
    return v->text;
  }

  void object(const CallArgs& args) {
    ObjectDecl decl;

    const Value* id = args.get("object_id", 0);
    if (id == nullptr || id->kind != Value::Kind::number || id->number != static_cast<double>(static_cast<int>(id->number))) {
      fail("object_id must be an integer");
    }
    decl.object_id = static_cast<int>(id->number);

    const std::string name = string_arg(args, "object_name", 1);
    const auto cls = parse_object_class(name);
    if (!cls) fail("unknown object class '" + name + "'");
    decl.cls = *cls;

    const Value* loc = args.get("object_location", 2);
    if (loc == nullptr || (loc->kind != Value::Kind::tuple && loc->kind != Value::Kind::list) || loc->items.size() != 2) {
      fail("object_location must be a ('row_N', 'column_M') pair");
    }
    const auto row = parse_row_token(loc->items[0].text);
    const auto col = parse_column_token(loc->items[1].text);
    if (!row || !col) fail("object_location must be a ('row_N', 'column_M') pair");
    decl.cell = {*row, *col};

    const std::string color_name = string_arg(args, "object_color", 3);
    const auto color = parse_color(color_name);
    if (!color) fail("unknown color '" + color_name + "'");
    decl.color = *color;

    PhysicsParams defaults;
    defaults.mass = class_info(decl.cls).mass;
    decl.physics = physics_block(physics_dict(args.get("object_physics", 4)), defaults, true);

    for (const auto& other : program_.declarations) {
      if (other.object_id == decl.object_id) fail("duplicate object_id " + std::to_string(decl.object_id));
      if (other.cell == decl.cell) {
        fail("duplicate grid cell (" + row_token(decl.cell.row) + ", " + column_token(decl.cell.column) + ")");
      }
      if (other.color == decl.color) {
        warn("color '" + color_name + "' is used by objects " + std::to_string(other.object_id) + " and " +
             std::to_string(decl.object_id));
      }
    }
    program_.declarations.push_back(std::move(decl));
  }

  std::vector<std::string>* warnings_;
  SceneProgram program_;
  std::map<std::string, Value> dictionaries_;
  bool has_tray_ = false;
  bool has_pusher_ = false;
  int line_ = 0;
  std::string label_;
};

void emit_dict(std::ostringstream& out, const std::string& name, const PhysicsBlock& block) {
  const auto& p = block.params;
  out << name << " = { \n"
      << "             'sliding-friction': " << format_number(p.sliding_friction) << ",\n"
      << "             'armature': " << format_number(p.armature) << ",\n"
      << "             'stiffness': " << format_number(p.stiffness) << ",\n"
      << "             'mass': " << format_number(p.mass) << ",\n"
      << "             'damping': " << format_number(p.damping);
  for (const auto& extra : block.extras) {
    out << ",\n             '" << extra.key << "': " << extra.literal;
  }
  out << "\n         }\n";
}

}  // namespace

std::string extract_program_text(std::string_view text) {
  const auto lines = split_lines(text);
  std::vector<std::pair<std::size_t, std::size_t>> blocks;  // [first, last) line ranges
  std::optional<std::size_t> open;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!starts_with(trim(lines[i]), "```")) continue;
    if (open) {
      blocks.emplace_back(*open + 1, i);
      open.reset();
    } else {
      open = i;
    }
  }
  if (open) blocks.emplace_back(*open + 1, lines.size());

  for (const auto& [first, last] : blocks) {
    std::string body;
    bool has_call = false;
    for (std::size_t i = first; i < last; ++i) {
      body.append(lines[i]);
      body.push_back('\n');
      if (lines[i].find("create_") != std::string_view::npos) has_call = true;
    }
    if (has_call) return body;
  }
  return std::string(text);
}

SceneProgram parse_program(std::string_view text, std::vector<std::string>* warnings) {
  const std::string body = extract_program_text(text);
  ProgramBuilder builder(warnings);
  for (const auto& st : assemble_statements(body)) builder.apply(st);
  return builder.finish();
}

std::string emit_program(const SceneProgram& program) {
  std::vector<const ObjectDecl*> ordered;
  for (const auto& d : program.declarations) ordered.push_back(&d);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const ObjectDecl* a, const ObjectDecl* b) { return a->object_id < b->object_id; });

  std::ostringstream out;
  out << "sim = SIMULATOR_MODEL()\n";
  out << "sim.create_pusher('" << format_number(program.pusher_start[0]) << ' '
      << format_number(program.pusher_start[1]) << ' ' << format_number(program.pusher_start[2]) << "')\n";
  emit_dict(out, "physical_parameters_for_object_id_tray", program.tray);
  out << "sim.create_tray(object_physics = physical_parameters_for_object_id_tray)\n";
  for (const ObjectDecl* d : ordered) {
    const std::string name = "physical_parameters_for_object_id_" + std::to_string(d->object_id);
    emit_dict(out, name, d->physics);
    out << "sim.create_object(object_id=" << d->object_id << ", object_name='" << to_string(d->cls)
        << "', object_location=('" << row_token(d->cell.row) << "', '" << column_token(d->cell.column)
        << "'), object_color='" << to_string(d->color) << "', object_physics=" << name << ")\n\n";
  }
  out << "sim.create_scene()\nsim_out=sim.run_simulation()\ndel sim\n";
  return out.str();
}

ClassParamsExtraction extract_class_params(const SceneProgram& program) {
  ClassParamsExtraction result;
  for (const auto& d : program.declarations) {
    auto [it, inserted] = result.params.emplace(d.cls, d.physics.params);
    if (!inserted && !(it->second == d.physics.params)) {
      result.warnings.push_back("object " + std::to_string(d.object_id) + " (" + std::string(to_string(d.cls)) +
                                ") disagrees with the first declaration of its class; keeping the first");
    }
  }
  return result;
}

SceneSpec program_scene(const SceneProgram& program, Vec2 pusher_velocity) {
  SceneSpec spec;
  spec.tray.ground_friction = program.tray.params.sliding_friction;
  spec.tray.mass = program.tray.params.mass;
  spec.pusher.start = {program.pusher_start[0], program.pusher_start[1]};
  spec.pusher.height = program.pusher_start[2];
  spec.pusher.velocity = pusher_velocity;
  for (const auto& d : program.declarations) spec.instances.push_back({d.object_id, d.cls, d.cell, d.color, d.physics.params});
  return spec;
}

}  // namespace traylab
