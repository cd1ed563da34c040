#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>

#include "honey/parser.hpp"
#include "programs.hpp"

using namespace honey;
using Kind = ArgValue::Kind;

namespace {

const OperatorStmt& op_of(const Statement& s) {
  const OperatorStmt* op = s.as<OperatorStmt>();
  if (!op) throw std::runtime_error("not an operator statement");
  return *op;
}

int syntax_line(const std::string& src) {
  try {
    parse_program(src, "t.hny");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::syntax) << src;
    if (!e.location()) return -1;
    EXPECT_EQ(e.location()->file, "t.hny");
    return e.location()->line;
  }
  return 0;
}

// Depth of every statement, by line, from the AST.
void ast_depths(const Block& b, int depth, std::map<int, int>& out) {
  for (const Statement& s : b) {
    out[s.loc.line] = depth;
    if (auto f = s.as<FunctionDef>()) ast_depths(f->body, depth + 1, out);
    if (auto g = s.as<Group>()) ast_depths(g->body, depth + 1, out);
    if (auto i = s.as<If>()) {
      ast_depths(i->then_body, depth + 1, out);
      if (i->else_body) ast_depths(*i->else_body, depth + 1, out);
    }
  }
}

}  // namespace

TEST(Parser, HelloWorldShape) {
  Block b = parse_program(test::kHelloWorld);
  ASSERT_EQ(b.size(), 5u);
  ASSERT_TRUE(b[0].as<Config>());
  EXPECT_EQ(b[0].as<Config>()->key, "data");
  EXPECT_EQ(b[0].as<Config>()->args.size(), 2u);

  const OperatorStmt& echo = op_of(b[1]);
  EXPECT_EQ(echo.op, "echo");
  EXPECT_EQ(*echo.target, "all");
  EXPECT_EQ(echo.args[0].value.kind, Kind::channel_regex);
  EXPECT_EQ(echo.args[0].value.text, ".*");

  const OperatorStmt& sma = op_of(b[2]);
  EXPECT_EQ(sma.op, "sma");
  EXPECT_EQ(sma.args[1].value.kind, Kind::number_literal);
  EXPECT_EQ(sma.args[1].value.number, 0.1);

  const OperatorStmt& merge = op_of(b[3]);
  EXPECT_TRUE(merge.merge);
  EXPECT_EQ(merge.op, "echo");

  const OperatorStmt& save = op_of(b[4]);
  EXPECT_FALSE(save.target);
  EXPECT_EQ(save.args[1].name, "file");
  EXPECT_EQ(save.args[1].value.text, "");
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b[i].loc.line, static_cast<int>(i) + 1);
}

TEST(Parser, CommentsAreKept) {
  Block b = parse_program("# hi\n  # indented\n");
  ASSERT_EQ(b.size(), 2u);
  EXPECT_TRUE(b[0].as<Comment>());
  EXPECT_TRUE(b[1].as<Comment>());
}

TEST(Parser, NamedAndPositionalArguments) {
  Statement s_stmt = parse_statement("$a = sma $b 5 trigger:$c");
  const OperatorStmt& s = op_of(s_stmt);
  EXPECT_EQ(*s.target, "a");
  EXPECT_FALSE(s.merge);
  ASSERT_EQ(s.args.size(), 3u);
  EXPECT_EQ(s.args[0], (Argument{"", ArgValue{Kind::channel_var, "b"}}));
  EXPECT_EQ(s.args[1].value.number, 5.0);
  EXPECT_EQ(s.args[2].name, "trigger");
  EXPECT_EQ(s.args[2].value.kind, Kind::channel_var);
  EXPECT_EQ(s.args[2].value.text, "c");
}

TEST(Parser, UntargetedOperator) {
  Statement s_stmt = parse_statement("sma $b 5 trigger:$c");
  const OperatorStmt& s = op_of(s_stmt);
  EXPECT_FALSE(s.target);
  EXPECT_EQ(s.op, "sma");
}

TEST(Parser, MergeShorthandIsEcho) {
  Statement s_stmt = parse_statement("$b += $a");
  const OperatorStmt& s = op_of(s_stmt);
  EXPECT_EQ(*s.target, "b");
  EXPECT_TRUE(s.merge);
  EXPECT_EQ(s.op, "echo");
  ASSERT_EQ(s.args.size(), 1u);
  EXPECT_EQ(s.args[0].value.text, "a");
  EXPECT_EQ(parse_statement("$b += $a"), parse_statement("$b += echo $a"));
}

TEST(Parser, Keywords) {
  EXPECT_EQ(parse_statement("recursive $a").as<RecursiveDecl>()->var, "a");
  EXPECT_EQ(parse_statement("global $a").as<GlobalDecl>()->var, "a");
  EXPECT_EQ(parse_statement("include \"library.hny\"").as<Include>()->path, "library.hny");
  Statement set_stmt = parse_statement("set %n% =2,3,+");
  const SetVar* set = set_stmt.as<SetVar>();
  ASSERT_TRUE(set);
  EXPECT_EQ(set->name, "n");
  EXPECT_EQ(set->value.kind, Kind::numeric_equation);
  Statement call_stmt = parse_statement("call doSomething $all 5");
  const Call* call = call_stmt.as<Call>();
  ASSERT_TRUE(call);
  EXPECT_EQ(call->function, "doSomething");
  EXPECT_EQ(call->args.size(), 2u);
  Statement bound_stmt = parse_statement("$r += call f $c 5");
  const Call* bound = bound_stmt.as<Call>();
  ASSERT_TRUE(bound);
  EXPECT_TRUE(bound->merge);
  EXPECT_EQ(*bound->target, "r");
  EXPECT_EQ(parse_statement("return $r").as<Return>()->value.text, "r");
}

TEST(Parser, ArgumentClassification) {
  EXPECT_EQ(classify_argument("=2,3,+,2,*").kind, Kind::numeric_equation);
  EXPECT_EQ(classify_argument("=2,3,+,2,*").text, "2,3,+,2,*");
  ArgValue re = classify_argument("#.*");
  EXPECT_EQ(re.kind, Kind::channel_regex);
  EXPECT_EQ(re.text, ".*");
  EXPECT_EQ(classify_argument("$abc").kind, Kind::channel_var);
  EXPECT_EQ(classify_argument("%w%").kind, Kind::non_channel_ref);
  EXPECT_EQ(classify_argument("%w%").text, "w");
  EXPECT_EQ(classify_argument("&a,b,+").kind, Kind::string_equation);
  EXPECT_EQ(classify_argument("&a,b,+", true).kind, Kind::string_equation);
  EXPECT_EQ(classify_argument("value,3,*", true).kind, Kind::string_literal);
  EXPECT_EQ(classify_argument("0.25").kind, Kind::number_literal);
  EXPECT_EQ(classify_argument("up").kind, Kind::string_literal);
  EXPECT_THROW(classify_argument("$"), Error);
  EXPECT_THROW(classify_argument("$1x"), Error);
  EXPECT_THROW(classify_argument("="), Error);
}

TEST(Parser, QuotedArgumentsKeepSpaces) {
  Statement s_stmt = parse_statement(R"($b = rename $a "&The ,little ,+,cat,+")");
  const OperatorStmt& s = op_of(s_stmt);
  EXPECT_EQ(s.args[1].value.kind, Kind::string_equation);
  EXPECT_EQ(s.args[1].value.text, "The ,little ,+,cat,+");
  Statement q_stmt = parse_statement(R"(save $a file:"dir with space/x \"1\".evt")");
  const OperatorStmt& q = op_of(q_stmt);
  EXPECT_EQ(q.args[1].value.text, "dir with space/x \"1\".evt");
}

TEST(Parser, Blocks) {
  Block b = parse_program(test::kOperatorRecursion);
  const FunctionDef* f = b[0].as<FunctionDef>();
  ASSERT_TRUE(f);
  EXPECT_EQ(f->name, "f");
  ASSERT_EQ(f->params.size(), 2u);
  EXPECT_EQ(f->params[1].kind, Kind::non_channel_ref);
  ASSERT_EQ(f->body.size(), 5u);
  const If* i = f->body[4].as<If>();
  ASSERT_TRUE(i);
  EXPECT_EQ(i->condition.kind, Kind::numeric_equation);
  EXPECT_EQ(i->then_body.size(), 1u);
  EXPECT_FALSE(i->else_body);

  Block c = parse_program(test::kConditional);
  const If* ie = c[1].as<If>();
  ASSERT_TRUE(ie && ie->else_body);
  EXPECT_EQ(ie->else_body->size(), 1u);

  Block g = parse_program(test::kVitals);
  bool found = false;
  for (const Statement& s : g)
    if (auto grp = s.as<Group>()) {
      found = true;
      EXPECT_EQ(grp->name, "activity");
      EXPECT_EQ(grp->body.size(), 1u);
    }
  EXPECT_TRUE(found);
}

TEST(Parser, SyntaxErrorsAreLocated) {
  EXPECT_EQ(syntax_line("$a = echo #.*\nfunction f $a\n$r = sd $a 5\n"), 2);  // unclosed function
  EXPECT_EQ(syntax_line("$a = echo #.*\nendfunction\n"), 2);
  EXPECT_EQ(syntax_line("if =1\n$a = echo #.*\n"), 1);
  EXPECT_EQ(syntax_line("endif\n"), 1);
  EXPECT_EQ(syntax_line("group \"a\"\nendgroup \"b\"\n"), 2);
  EXPECT_EQ(syntax_line("\n\n$a = sma $b \"open\n"), 3);
  EXPECT_EQ(syntax_line("$a = \n"), 1);
  EXPECT_EQ(syntax_line("$a b = echo\n"), 1);
  EXPECT_EQ(syntax_line("function f $a\nfunction g $b\nendfunction\nendfunction\n"), 2);
  EXPECT_EQ(syntax_line("if $a\nendif\n"), 1);
  EXPECT_EQ(syntax_line("else\n"), 1);
}

TEST(Parser, PrintRoundTripOnCorpus) {
  for (const std::string& src : test::corpus()) {
    Block b = parse_program(src);
    std::string printed = print_program(b);
    Block again = parse_program(printed);
    EXPECT_EQ(again, b) << printed;
    EXPECT_EQ(print_program(again), printed);
  }
}

TEST(Parser, NestingDepthMatchesLinearScan) {
  for (const std::string& src : test::corpus()) {
    std::map<int, int> depth;
    ast_depths(parse_program(src), 0, depth);
    std::istringstream in(src);
    std::string line;
    int n = 0, open = 0;
    while (std::getline(in, line)) {
      ++n;
      std::istringstream words(line);
      std::string first;
      words >> first;
      if (first == "endfunction" || first == "endif" || first == "endgroup") {
        --open;
        continue;
      }
      if (first == "else") continue;
      if (!first.empty()) EXPECT_EQ(depth.at(n), open) << "line " << n << ": " << line;
      if (first == "function" || first == "if" || first == "group") ++open;
    }
    EXPECT_EQ(open, 0);
  }
}

TEST(Parser, FuzzedTokenShufflesNeverCrash) {
  std::mt19937 gen(99);
  auto corpus = test::corpus();
  int located = 0, parsed = 0;
  for (int i = 0; i < 3000; ++i) {
    const std::string& base = corpus[static_cast<std::size_t>(i) % corpus.size()];
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : base) {
      if (c == ' ' || c == '\n') {
        if (!cur.empty()) tokens.push_back(cur);
        cur.clear();
        if (c == '\n') tokens.push_back("\n");
      } else {
        cur += c;
      }
    }
    std::uniform_int_distribution<std::size_t> pick(0, tokens.size() - 1);
    for (int k = 0; k < 3; ++k) std::swap(tokens[pick(gen)], tokens[pick(gen)]);
    std::string src;
    for (const auto& t : tokens) src += t == "\n" ? t : t + " ";
    try {
      parse_program(src, "fuzz.hny");
      ++parsed;
    } catch (const Error& e) {
      ASSERT_TRUE(e.location()) << e.what();
      ++located;
    }
  }
  EXPECT_GT(located, 0);
  EXPECT_GT(parsed, 0);
}
