#include "honey/compiler.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "honey/operators.hpp"
#include "honey/parser.hpp"
#include "honey/rpn.hpp"

namespace honey {

const char* mode_name(ExecMode mode) {
  switch (mode) {
    case ExecMode::streaming: return "streaming";
    case ExecMode::static_mode: return "static";
    case ExecMode::realtime: return "realtime";
  }
  return "?";
}

std::optional<ExecMode> parse_mode(std::string_view name) {
  if (name == "streaming") return ExecMode::streaming;
  if (name == "static") return ExecMode::static_mode;
  if (name == "realtime") return ExecMode::realtime;
  return std::nullopt;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

using Producers = std::vector<NodeId>;

void merge_into(Producers& dst, const Producers& src) {
  dst.insert(dst.end(), src.begin(), src.end());
  std::sort(dst.begin(), dst.end());
  dst.erase(std::unique(dst.begin(), dst.end()), dst.end());
}

std::vector<std::string> split_paths(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t semi = s.find(';', start);
    std::string part = s.substr(start, semi == std::string::npos ? std::string::npos : semi - start);
    if (!part.empty()) out.push_back(part);
    if (semi == std::string::npos) break;
    start = semi + 1;
  }
  return out;
}

struct Binding {
  Producers producers;
  bool used = false;
  SourceLocation loc;
};

struct Junction {
  NodeId node = 0;
  bool read = false;
};

struct Frame {
  std::string function;
  std::map<std::string, Binding> chans;
  std::map<std::string, Scalar> scalars;
  std::set<std::string> globals;
  std::map<std::string, Junction> recursive;
  Producers* returns = nullptr;
};

struct CallKey {
  std::string function;
  std::vector<std::pair<std::string, Scalar>> env;
  friend bool operator==(const CallKey&, const CallKey&) = default;
};

void collect_targets(const Block& block, std::set<std::string>& out) {
  for (const Statement& s : block) {
    if (auto* op = s.as<OperatorStmt>(); op && op->target) out.insert(*op->target);
    if (auto* c = s.as<Call>(); c && c->target) out.insert(*c->target);
    if (auto* f = s.as<FunctionDef>()) collect_targets(f->body, out);
    if (auto* g = s.as<Group>()) collect_targets(g->body, out);
    if (auto* i = s.as<If>()) {
      collect_targets(i->then_body, out);
      if (i->else_body) collect_targets(*i->else_body, out);
    }
  }
}

class Compiler {
 public:
  Compiler(const std::string& file, const CompileOptions& options) : options_(options) {
    main_dir_ = std::filesystem::path(file).parent_path().string();
    dirs_.push_back(main_dir_);
    includes_.push_back(file);
    if (!options_.loader) options_.loader = read_text_file;
    frames_.emplace_back();
  }

  CompiledProgram run(const Block& program) {
    collect_targets(program, targets_);
    read_config(program);
    compile_block(program);
    close_frame(frames_.back());
    finalize(out_.graph);
    return std::move(out_);
  }

 private:
  // ---- configuration -------------------------------------------------------

  void read_config(const Block& program) {
    std::optional<std::vector<std::string>> inputs, outputs;
    for (const Statement& s : program) {
      const Config* c = s.as<Config>();
      if (!c) continue;
      if (c->key != "data") throw Error(Errc::config, "unknown configuration '@" + c->key + "'", s.loc);
      for (const Argument& a : c->args) {
        if (a.name != "input" && a.name != "output")
          throw Error(Errc::config, "@data accepts input: and output:, got '" + print_argument(a) + "'", s.loc);
        std::vector<std::string> paths;
        for (const std::string& p : split_paths(a.value.text)) paths.push_back(resolve_data_path(p));
        (a.name == "input" ? inputs : outputs) = paths;
      }
    }
    out_.inputs = options_.inputs ? *options_.inputs : inputs.value_or(std::vector<std::string>{});
    out_.outputs = options_.outputs ? *options_.outputs : outputs.value_or(std::vector<std::string>{});
  }

  std::string resolve_data_path(const std::string& p) const {
    if (p.empty() || main_dir_.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (std::filesystem::path(main_dir_) / p).string();
  }

  // ---- statements ----------------------------------------------------------

  void compile_block(const Block& block) {
    for (const Statement& s : block) {
      try {
        compile_statement(s);
      } catch (const Error& e) {
        if (!e.location()) throw Error(e.code(), e.message(), s.loc);
        throw;
      }
    }
  }

  void compile_statement(const Statement& s) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Comment>) {
          } else if constexpr (std::is_same_v<T, Config>) {
            if (frames_.size() > 1 || includes_.size() > 1 || !groups_.empty() || nesting_ > 0)
              throw Error(Errc::config, "configuration statements belong at the top level of the program", s.loc);
          } else if constexpr (std::is_same_v<T, OperatorStmt>) {
            compile_operator(n, s.loc);
          } else if constexpr (std::is_same_v<T, FunctionDef>) {
            if (functions_.count(n.name)) throw Error(Errc::argument, "function '" + n.name + "' is already defined", s.loc);
            functions_.emplace(n.name, &n);
          } else if constexpr (std::is_same_v<T, Return>) {
            Frame& f = frames_.back();
            if (!f.returns) throw Error(Errc::syntax, "return outside of a function", s.loc);
            merge_into(*f.returns, read_var(n.value.text, s.loc));
          } else if constexpr (std::is_same_v<T, Call>) {
            compile_call(n, s.loc);
          } else if constexpr (std::is_same_v<T, Include>) {
            compile_include(n, s.loc);
          } else if constexpr (std::is_same_v<T, SetVar>) {
            frames_.back().scalars[n.name] = eval_scalar(resolve(n.value, s.loc), s.loc);
          } else if constexpr (std::is_same_v<T, If>) {
            ArgValue cond = resolve(n.condition, s.loc);
            if (cond.kind != ArgValue::Kind::numeric_equation && cond.kind != ArgValue::Kind::number_literal)
              throw Error(Errc::type, "if condition must be a numeric equation", s.loc);
            double v = cond.kind == ArgValue::Kind::number_literal ? cond.number : eval_numeric(cond.text);
            ++nesting_;
            if (v != 0.0) {
              compile_block(n.then_body);
            } else if (n.else_body) {
              compile_block(*n.else_body);
            }
            --nesting_;
          } else if constexpr (std::is_same_v<T, Group>) {
            groups_.push_back(n.name);
            register_group(s.loc, false);
            compile_block(n.body);
            groups_.pop_back();
          } else if constexpr (std::is_same_v<T, RecursiveDecl>) {
            declare_recursive(n.var, s.loc);
          } else if constexpr (std::is_same_v<T, GlobalDecl>) {
            if (frames_.size() > 1) frames_.back().globals.insert(n.var);
          }
        },
        s.node);
  }

  void register_group(const SourceLocation& loc, bool call) {
    for (const GroupInfo& g : out_.graph.groups)
      if (g.path == groups_) return;
    out_.graph.groups.push_back(GroupInfo{groups_, loc, call});
  }

  void compile_include(const Include& inc, const SourceLocation& loc) {
    std::filesystem::path p(inc.path);
    std::string path = p.is_absolute() || dirs_.back().empty() ? inc.path : (std::filesystem::path(dirs_.back()) / p).string();
    std::string key = std::filesystem::path(path).lexically_normal().string();
    for (const std::string& open : includes_)
      if (std::filesystem::path(open).lexically_normal().string() == key)
        throw Error(Errc::include_cycle, "include cycle through '" + path + "'", loc);
    std::string text;
    try {
      text = options_.loader(path);
    } catch (const Error& e) {
      throw Error(e.code(), e.message(), loc);
    }
    Block block = parse_program(text, path);
    included_.push_back(std::make_unique<Block>(std::move(block)));
    includes_.push_back(path);
    dirs_.push_back(std::filesystem::path(path).parent_path().string());
    compile_block(*included_.back());
    dirs_.pop_back();
    includes_.pop_back();
  }

  // ---- variables -----------------------------------------------------------

  Frame& frame_for(const std::string& name) {
    Frame& f = frames_.back();
    if (frames_.size() > 1 && f.globals.count(name)) return frames_.front();
    return f;
  }

  void declare_recursive(const std::string& name, const SourceLocation& loc) {
    Frame& f = frame_for(name);
    if (f.recursive.count(name)) return;
    if (f.chans.count(name))
      throw Error(Errc::recursion, "$" + name + " is already bound; declare it recursive before its first use", loc);
    OperatorNode node;
    node.op_name = "echo";
    node.junction_for = name;
    node.args["in"] = std::string("$" + name);
    NodeId id = add_node(std::move(node), loc);
    f.recursive[name] = Junction{id, false};
  }

  Producers read_var(const std::string& name, const SourceLocation& loc) {
    Frame& f = frame_for(name);
    if (auto it = f.recursive.find(name); it != f.recursive.end()) {
      it->second.read = true;
      return {it->second.node};
    }
    auto it = f.chans.find(name);
    if (it == f.chans.end()) {
      std::string msg = "channel variable $" + name + " is not bound";
      if (targets_.count(name)) msg += " (it is assigned later; did you mean to declare it recursive?)";
      throw Error(Errc::unbound_variable, msg, loc);
    }
    it->second.used = true;
    return it->second.producers;
  }

  void write_var(const std::string& name, bool merge, const Producers& producers, const SourceLocation& loc) {
    Frame& f = frame_for(name);
    if (auto it = f.recursive.find(name); it != f.recursive.end()) {
      if (!merge) throw Error(Errc::recursion, "recursive variable $" + name + " can only be extended with '+='", loc);
      for (NodeId p : producers) out_.graph.pipes.push_back(Pipe{p, it->second.node, "in", it->second.read});
      return;
    }
    auto it = f.chans.find(name);
    if (merge && it != f.chans.end()) {
      merge_into(it->second.producers, producers);
      return;
    }
    if (it != f.chans.end()) warn_unused(name, it->second);
    Binding b;
    b.producers = producers;
    std::sort(b.producers.begin(), b.producers.end());
    b.producers.erase(std::unique(b.producers.begin(), b.producers.end()), b.producers.end());
    b.loc = loc;
    f.chans[name] = std::move(b);
  }

  void warn_unused(const std::string& name, const Binding& b) {
    if (b.used) return;
    out_.graph.notes.push_back(
        Diagnostic{Severity::warning, Errc::unbound_variable, "value of $" + name + " is never used", b.loc});
  }

  void close_frame(Frame& f) {
    for (const auto& [name, b] : f.chans) warn_unused(name, b);
  }

  // ---- non-channel values --------------------------------------------------

  const Scalar* find_scalar(const std::string& name) {
    auto& local = frames_.back().scalars;
    if (auto it = local.find(name); it != local.end()) return &it->second;
    auto& top = frames_.front().scalars;
    if (auto it = top.find(name); it != top.end()) return &it->second;
    return nullptr;
  }

  std::string substitute(const std::string& text, const SourceLocation& loc) {
    if (text.find('%') == std::string::npos) return text;
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
      if (text[i] == '%') {
        std::size_t end = text.find('%', i + 1);
        if (end != std::string::npos && end > i + 1 && is_identifier(std::string_view(text).substr(i + 1, end - i - 1))) {
          std::string name = text.substr(i + 1, end - i - 1);
          const Scalar* v = find_scalar(name);
          if (!v) throw Error(Errc::unbound_variable, "non-channel variable %" + name + "% is not set", loc);
          out += scalar_text(*v);
          i = end + 1;
          continue;
        }
      }
      out += text[i++];
    }
    return out;
  }

  // Applies %name% substitution, then re-classifies the token.
  ArgValue resolve(const ArgValue& v, const SourceLocation& loc) {
    if (v.kind == ArgValue::Kind::non_channel_ref) {
      const Scalar* s = find_scalar(v.text);
      if (!s) throw Error(Errc::unbound_variable, "non-channel variable %" + v.text + "% is not set", loc);
      ArgValue out;
      if (const double* d = std::get_if<double>(s)) {
        out.kind = ArgValue::Kind::number_literal;
        out.number = *d;
      } else {
        out.kind = ArgValue::Kind::string_literal;
        out.text = std::get<std::string>(*s);
        out.quoted = true;
      }
      return out;
    }
    if (v.kind == ArgValue::Kind::number_literal) return v;
    std::string raw = raw_text(v);
    std::string sub = substitute(raw, loc);
    if (sub == raw) return v;
    return classify_argument(sub, v.quoted, loc);
  }

  Scalar eval_scalar(const ArgValue& v, const SourceLocation& loc) {
    switch (v.kind) {
      case ArgValue::Kind::number_literal: return v.number;
      case ArgValue::Kind::numeric_equation: return eval_numeric(v.text);
      case ArgValue::Kind::string_equation: return eval_string(v.text);
      case ArgValue::Kind::string_literal: return v.text;
      default: break;
    }
    throw Error(Errc::type, "expected a number, a string or an equation, got '" + raw_text(v) + "'", loc);
  }

  // ---- operators -----------------------------------------------------------

  NodeId add_node(OperatorNode node, const SourceLocation& loc) {
    if (out_.graph.nodes.size() >= options_.max_nodes)
      throw Error(Errc::recursion, "program expands to more than " + std::to_string(options_.max_nodes) + " operators", loc);
    node.id = out_.graph.nodes.size();
    node.group_path = groups_;
    node.loc = loc;
    out_.graph.nodes.push_back(std::move(node));
    return out_.graph.nodes.back().id;
  }

  // An implicit echo reading dataset channels ("call f #HR 5").
  NodeId source_echo(const ArgValue& v, const SourceLocation& loc) {
    OperatorNode node;
    node.op_name = "echo";
    node.source = selection(v, loc);
    node.args["in"] = v.quoted ? "\"" + v.text + "\"" : raw_text(v);
    return add_node(std::move(node), loc);
  }

  Selection selection(const ArgValue& v, const SourceLocation& loc) {
    if (v.kind == ArgValue::Kind::channel_regex) {
      try {
        std::regex re(v.text, std::regex::ECMAScript);
      } catch (const std::regex_error& e) {
        throw Error(Errc::regex, "invalid channel regex '" + v.text + "': " + e.what(), loc);
      }
      return Selection{Selection::Kind::regex, v.text};
    }
    return Selection{Selection::Kind::exact, v.text};
  }

  static bool is_arg_port(const std::string& name) {
    return name.size() > 3 && name.compare(0, 3, "arg") == 0 && name[3] != '0' && name.size() <= 6 &&
           std::all_of(name.begin() + 3, name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  }

  void compile_operator(const OperatorStmt& st, const SourceLocation& loc) {
    const OperatorSpec* spec = find_operator(st.op);
    if (!spec) throw Error(Errc::unknown_operator, "unknown operator '" + st.op + "'", loc);
    if (st.target && spec->sink) throw Error(Errc::argument, st.op + " has no output to assign", loc);

    std::vector<ArgValue> values;
    for (const Argument& a : st.args) values.push_back(resolve(a.value, loc));

    // echo of a variable is an alias, not an operator.
    if (st.op == "echo" && st.args.size() == 1 && st.args[0].name.empty() &&
        values[0].kind == ArgValue::Kind::channel_var) {
      Producers p = read_var(values[0].text, loc);
      if (st.target) write_var(*st.target, st.merge, p, loc);
      return;
    }

    // Bind arguments to parameters.
    std::vector<std::optional<std::size_t>> bound(spec->params.size());
    std::vector<bool> positional(spec->params.size(), false);
    std::vector<std::pair<int, std::size_t>> arg_ports;  // (K, argument index)
    std::size_t next_pos = 0;
    for (std::size_t i = 0; i < st.args.size(); ++i) {
      const std::string& name = st.args[i].name;
      if (name.empty()) {
        while (next_pos < spec->params.size() && bound[next_pos]) ++next_pos;
        if (next_pos >= spec->params.size())
          throw Error(Errc::argument, st.op + ": too many arguments", loc);
        bound[next_pos] = i;
        positional[next_pos] = true;
        ++next_pos;
        continue;
      }
      if (spec->arg_pipes && is_arg_port(name)) {
        arg_ports.emplace_back(std::stoi(name.substr(3)), i);
        continue;
      }
      auto it = std::find_if(spec->params.begin(), spec->params.end(), [&](const ParamSpec& p) { return p.name == name; });
      if (it == spec->params.end()) throw Error(Errc::argument, st.op + ": unknown argument '" + name + "'", loc);
      std::size_t k = static_cast<std::size_t>(it - spec->params.begin());
      if (bound[k]) throw Error(Errc::argument, st.op + ": argument '" + name + "' given twice", loc);
      bound[k] = i;
    }

    OperatorNode node;
    node.op_name = spec->name;
    node.needs_span = spec->source;
    std::vector<std::pair<std::string, Producers>> inputs;

    for (std::size_t k = 0; k < spec->params.size(); ++k) {
      const ParamSpec& p = spec->params[k];
      if (!bound[k]) {
        if (p.required) throw Error(Errc::argument, st.op + ": missing required argument '" + p.name + "'", loc);
        if (p.fallback) node.args.emplace(p.name, *p.fallback);
        continue;
      }
      const ArgValue& v = values[*bound[k]];
      switch (p.type) {
        case ParamType::channel: {
          if (v.kind == ArgValue::Kind::channel_var) {
            inputs.emplace_back(p.name, read_var(v.text, loc));
            node.args[p.name] = "$" + v.text;
          } else if (p.name == "in" && (v.kind == ArgValue::Kind::channel_regex ||
                                        (v.kind == ArgValue::Kind::string_literal && v.quoted))) {
            node.source = selection(v, loc);
            node.args[p.name] = v.quoted ? "\"" + v.text + "\"" : raw_text(v);
          } else {
            throw Error(Errc::argument, st.op + ": argument '" + p.name + "' expects a channel variable, got '" +
                                            raw_text(v) + "'", loc);
          }
          break;
        }
        case ParamType::number: {
          double d;
          if (v.kind == ArgValue::Kind::number_literal) {
            d = v.number;
          } else if (v.kind == ArgValue::Kind::numeric_equation) {
            d = eval_numeric(v.text);
          } else {
            throw Error(Errc::type, st.op + ": argument '" + p.name + "' expects a number, got '" + raw_text(v) + "'",
                        loc);
          }
          node.args[p.name] = d;
          if (positional[k]) node.label_params.push_back(format_number(d));
          break;
        }
        case ParamType::string: {
          std::string text;
          if (v.kind == ArgValue::Kind::string_literal) {
            text = v.text;
          } else if (v.kind == ArgValue::Kind::string_equation) {
            text = eval_string(v.text);
            if (spec->name == "rename") node.args["merge"] = 1.0;
          } else if (v.kind == ArgValue::Kind::number_literal) {
            text = format_number(v.number);
          } else if (v.kind == ArgValue::Kind::numeric_equation) {
            text = format_number(eval_numeric(v.text));
          } else {
            throw Error(Errc::type, st.op + ": argument '" + p.name + "' expects a string, got '" + raw_text(v) + "'",
                        loc);
          }
          node.args[p.name] = text;
          if (positional[k]) node.label_params.push_back(text);
          break;
        }
        case ParamType::equation: {
          if (v.kind == ArgValue::Kind::number_literal) {
            node.args[p.name] = v.number;
          } else if (v.kind == ArgValue::Kind::numeric_equation) {
            node.args[p.name] = eval_numeric(v.text);
          } else if (v.kind == ArgValue::Kind::string_literal) {
            node.args[p.name] = v.text;
          } else {
            throw Error(Errc::type, st.op + ": argument '" + p.name + "' expects a record equation", loc);
          }
          if (positional[k]) node.label_params.push_back(scalar_text(node.args[p.name]));
          break;
        }
      }
    }
    for (const auto& [K, index] : arg_ports) {
      const ArgValue& v = values[index];
      if (v.kind != ArgValue::Kind::channel_var)
        throw Error(Errc::argument, st.op + ": arg" + std::to_string(K) + " expects a channel variable", loc);
      std::string port = "arg" + std::to_string(K);
      if (node.args.count(port)) throw Error(Errc::argument, st.op + ": " + port + " given twice", loc);
      inputs.emplace_back(port, read_var(v.text, loc));
      node.args[port] = "$" + v.text;
    }

    if (spec->name == "save" || spec->name == "saveBufferedCsv") {
      std::string file = scalar_text(node.args["file"]);
      if (file.empty() && !out_.outputs.empty()) {
        file = out_.outputs.front();
      } else {
        file = resolve_data_path(file);
      }
      node.args["file"] = file;
    }
    if (spec->name == "echoPast" && options_.mode == ExecMode::realtime)
      throw Error(Errc::echo_past_in_realtime, "echoPast cannot run in realtime mode", loc);

    node.loc = loc;
    make_operator(node);  // argument validation

    NodeId id = add_node(std::move(node), loc);
    for (const auto& [port, producers] : inputs)
      for (NodeId from : producers) out_.graph.pipes.push_back(Pipe{from, id, port, false});
    if (st.target) write_var(*st.target, st.merge, Producers{id}, loc);
  }

  // ---- functions -----------------------------------------------------------

  void compile_call(const Call& c, const SourceLocation& loc) {
    auto it = functions_.find(c.function);
    if (it == functions_.end()) throw Error(Errc::unknown_operator, "unknown function '" + c.function + "'", loc);
    const FunctionDef& fn = *it->second;
    if (c.args.size() != fn.params.size())
      throw Error(Errc::argument, "function " + fn.name + " takes " + std::to_string(fn.params.size()) +
                                      " argument(s), got " + std::to_string(c.args.size()), loc);
    for (const Argument& a : c.args)
      if (!a.name.empty()) throw Error(Errc::argument, "function arguments are positional", loc);

    Frame frame;
    frame.function = fn.name;
    CallKey key{fn.name, {}};
    for (std::size_t i = 0; i < fn.params.size(); ++i) {
      const ArgValue& param = fn.params[i];
      ArgValue v = resolve(c.args[i].value, loc);
      if (param.kind == ArgValue::Kind::channel_var) {
        Binding b;
        b.used = true;
        b.loc = loc;
        if (v.kind == ArgValue::Kind::channel_var) {
          b.producers = read_var(v.text, loc);
        } else if (v.kind == ArgValue::Kind::channel_regex || (v.kind == ArgValue::Kind::string_literal && v.quoted)) {
          b.producers = {source_echo(v, loc)};
        } else {
          throw Error(Errc::argument, "parameter $" + param.text + " of " + fn.name + " expects channels", loc);
        }
        frame.chans[param.text] = std::move(b);
      } else {
        Scalar s = eval_scalar(v, loc);
        frame.scalars[param.text] = s;
        key.env.emplace_back(param.text, s);
      }
    }

    for (const CallKey& open : calls_)
      if (open == key)
        throw Error(Errc::infinite_recursion,
                    "infinite recursion: " + fn.name + " is called again with the same non-channel arguments", loc);
    if (static_cast<int>(calls_.size()) >= options_.max_call_depth)
      throw Error(Errc::recursion, "call depth exceeds " + std::to_string(options_.max_call_depth), loc);

    Producers result;
    frame.returns = &result;
    groups_.push_back(fn.name + "#" + std::to_string(++call_count_[fn.name]));
    register_group(loc, true);
    frames_.push_back(std::move(frame));
    calls_.push_back(std::move(key));
    compile_block(fn.body);
    calls_.pop_back();
    close_frame(frames_.back());
    frames_.pop_back();
    groups_.pop_back();

    if (c.target) write_var(*c.target, c.merge, result, loc);
  }

  CompileOptions options_;
  CompiledProgram out_;
  std::string main_dir_;
  std::vector<std::string> dirs_;
  std::vector<std::string> includes_;
  std::vector<std::unique_ptr<Block>> included_;
  std::vector<Frame> frames_;
  std::vector<std::string> groups_;
  std::map<std::string, const FunctionDef*> functions_;
  std::map<std::string, int> call_count_;
  std::vector<CallKey> calls_;
  std::set<std::string> targets_;
  int nesting_ = 0;
};

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

std::string node_label(const OperatorNode& n) {
  std::string label = "#" + std::to_string(n.id) + " " + n.op_name;
  if (!n.junction_for.empty()) return label + " (recursive $" + n.junction_for + ")";
  for (const auto& [k, v] : n.args) label += "\n" + k + ": " + scalar_text(v);
  return label;
}

double node_shift(const OperatorNode& n) {
  if (n.op_name == "delay")
    if (const Scalar* d = n.arg("d"); d && std::holds_alternative<double>(*d)) return std::get<double>(*d);
  if (n.op_name == "echoPast")
    if (const Scalar* w = n.arg("w"); w && std::holds_alternative<double>(*w)) return -std::get<double>(*w);
  return 0.0;
}

}  // namespace

CompiledProgram compile(const Block& program, const std::string& file, const CompileOptions& options) {
  Compiler c(file, options);
  return c.run(program);
}

CompiledProgram compile_source(std::string_view source, const std::string& file, const CompileOptions& options) {
  Block program = parse_program(source, file);
  return compile(program, file, options);
}

CompiledProgram compile_file(const std::string& path, const CompileOptions& options) {
  std::string text = options.loader ? options.loader(path) : read_text_file(path);
  return compile_source(text, path, options);
}

std::vector<Diagnostic> validate(const FlowGraph& graph, ExecMode mode) {
  std::vector<Diagnostic> out;
  auto describe = [&](const std::vector<NodeId>& cycle) {
    std::string s;
    for (NodeId id : cycle) s += (s.empty() ? "" : " -> ") + ("#" + std::to_string(id) + " " + graph.nodes[id].op_name);
    return s;
  };
  for (const auto& cycle : graph.cycles) {
    const SourceLocation& loc = graph.nodes[cycle.front()].loc;
    if (mode == ExecMode::static_mode)
      out.push_back({Severity::error, Errc::cycle,
                     "static mode does not support recursive programs (cycle " + describe(cycle) + ")", loc});
    bool has_delay = false;
    double total = 0.0;
    for (NodeId id : cycle) {
      double s = node_shift(graph.nodes[id]);
      if (graph.nodes[id].op_name == "delay" && s > 0.0) has_delay = true;
      total += s;
    }
    if (!has_delay || !(total > 0.0))
      out.push_back({Severity::error, Errc::recursion,
                     "cycle " + describe(cycle) + " needs a delay with a positive constant to make progress", loc});
  }
  for (const OperatorNode& n : graph.nodes) {
    if (n.op_name == "echoPast" && mode == ExecMode::realtime)
      out.push_back({Severity::error, Errc::echo_past_in_realtime, "echoPast cannot run in realtime mode", n.loc});
    if (n.op_name == "save" || n.op_name == "saveBufferedCsv") {
      const Scalar* f = n.arg("file");
      if (!f || scalar_text(*f).empty())
        out.push_back({Severity::error, Errc::config,
                       n.op_name + " has an unresolved file argument (set @data output or --output)", n.loc});
    }
  }
  for (const GroupInfo& g : graph.groups) {
    bool used = std::any_of(graph.nodes.begin(), graph.nodes.end(), [&](const OperatorNode& n) {
      return n.group_path.size() >= g.path.size() && std::equal(g.path.begin(), g.path.end(), n.group_path.begin());
    });
    if (!used && !g.call) out.push_back({Severity::warning, Errc::config, "group \"" + g.path.back() + "\" is empty", g.loc});
  }
  out.insert(out.end(), graph.notes.begin(), graph.notes.end());
  return out;
}

std::string export_dot(const FlowGraph& graph) {
  std::ostringstream out;
  out << "digraph honey {\n";
  if (!graph.nodes.empty()) out << "  node [shape=box];\n";

  // Clusters follow the order in which groups were opened.
  std::vector<std::vector<std::string>> paths;
  for (const GroupInfo& g : graph.groups)
    if (!g.call || std::any_of(graph.nodes.begin(), graph.nodes.end(), [&](const OperatorNode& n) {
          return n.group_path.size() >= g.path.size() && std::equal(g.path.begin(), g.path.end(), n.group_path.begin());
        }))
      paths.push_back(g.path);
  for (const OperatorNode& n : graph.nodes)
    for (std::size_t k = 1; k <= n.group_path.size(); ++k) {
      std::vector<std::string> prefix(n.group_path.begin(), n.group_path.begin() + static_cast<long>(k));
      if (std::find(paths.begin(), paths.end(), prefix) == paths.end()) paths.push_back(prefix);
    }

  int cluster = 0;
  std::function<void(const std::vector<std::string>&, int)> emit = [&](const std::vector<std::string>& path, int depth) {
    std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
    for (const OperatorNode& n : graph.nodes)
      if (n.group_path == path)
        out << indent << "n" << n.id << " [label=\"" << dot_escape(node_label(n)) << "\"];\n";
    for (const auto& child : paths) {
      if (child.size() != path.size() + 1 || !std::equal(path.begin(), path.end(), child.begin())) continue;
      out << indent << "subgraph cluster_" << cluster++ << " {\n";
      out << indent << "  label=\"" << dot_escape(child.back()) << "\";\n";
      emit(child, depth + 1);
      out << indent << "}\n";
    }
  };
  emit({}, 1);

  for (const Pipe& p : graph.pipes) {
    out << "  n" << p.from << " -> n" << p.to;
    std::vector<std::string> attrs;
    if (p.port != "in") attrs.push_back("label=\"" + dot_escape(p.port) + "\"");
    if (p.recursive_back_edge) attrs.push_back("style=dashed");
    if (!attrs.empty()) {
      out << " [";
      for (std::size_t i = 0; i < attrs.size(); ++i) out << (i ? ", " : "") << attrs[i];
      out << "]";
    }
    out << ";\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace honey
