#include <gtest/gtest.h>

#include <random>
#include <set>

#include "honey/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace honey;
using honey::test::rec;
using honey::test::run_records;

namespace {

std::vector<Record> run_op(const std::string& op_line, const std::vector<Record>& in) {
  return run_records(oracle::single_op(op_line), in);
}

void expect_series(const std::vector<Record>& got, const std::vector<Record>& want, double rel = 1e-12) {
  std::string d = oracle::diff(got, want, rel);
  EXPECT_TRUE(d.empty()) << d;
}

}  // namespace

TEST(Operators, SmaOnWalkthroughValues) {
  std::vector<Record> toto = {rec("toto", 1, 1.0), rec("toto", 2, 1.1), rec("toto", 5, 1.2)};
  expect_series(run_op("sma $all 2", toto),
                {rec("toto_sma[2]", 1, 1.0), rec("toto_sma[2]", 2, 1.05), rec("toto_sma[2]", 5, 1.2)});
}

TEST(Operators, SdOfSingleRecordIsZero) {
  expect_series(run_op("sd $all 2", {rec("x", 3, 7.5)}), {rec("x_sd[2]", 3, 0.0)});
}

TEST(Operators, EmaEdgeCases) {
  auto out = run_op("ema $all 2", {rec("x", 0, 4.0), rec("x", 1e6, 9.0)});
  expect_series(out, {rec("x_ema[2]", 0, 4.0), rec("x_ema[2]", 1e6, 9.0)});
}

TEST(Operators, NormalizeHandArithmetic) {
  auto out = run_op("normalize $all 10", {rec("x", 0, 2.0), rec("x", 1, 2.0), rec("x", 2, 1.0), rec("x", 3, 3.0)});
  // windows {2,2} skipped; {2,2,1}: mean 5/3; {2,2,1,3}: mean 2, sd sqrt(0.5)
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(*out[0].value, (1.0 - 5.0 / 3.0) / std::sqrt(2.0 / 9.0), 1e-12);
  EXPECT_NEAR(*out[1].value, 1.0 / std::sqrt(0.5), 1e-12);
  expect_series(run_op("normalize $all 10", {rec("x", 0, 1.0), rec("x", 1, 3.0)}), {rec("x_normalize[10]", 1, 1.0)});
}

TEST(Operators, DerivativeExamples) {
  expect_series(run_op("derivative $all", {rec("x", 0, 0.0), rec("x", 2, 4.0)}), {rec("x_derivative", 2, 2.0)});
  std::vector<Record> ramp;
  for (int i = 0; i < 50; ++i) ramp.push_back(rec("x", i * 0.37, 1.5 + 3.0 * i * 0.37));
  for (const Record& r : run_op("derivative $all", ramp)) EXPECT_NEAR(*r.value, 3.0, 1e-9);
}

TEST(Operators, DerivativeSameTimeIsDiagnosed) {
  CompiledProgram p = test::compile_text(oracle::single_op("derivative $all"));
  MemorySinkProvider sinks;
  RunReport rep = test::run_graph(p.graph, {rec("x", 0, 0.0), rec("x", 0, 1.0), rec("x", 1, 3.0)}, sinks);
  ASSERT_EQ(rep.diagnostics.size(), 1u);
  EXPECT_EQ(rep.diagnostics[0].code, Errc::math);
  expect_series(test::parse_evt(sinks.content("out.evt")), {rec("x_derivative", 1, 2.0)});
}

TEST(Operators, DelayAndEchoPast) {
  expect_series(run_op("delay $all 0.5", {rec("x", 10, 3.0)}), {rec("x", 10.5, 3.0)});
  std::vector<Record> in = {rec("x", 1, 1.0), rec("y", 2), rec("x", 4, 2.0)};
  expect_series(run_op("delay $all 0", in), in);
  expect_series(run_op("echoPast $all 1", in), {rec("x", 0, 1.0), rec("y", 1), rec("x", 3, 2.0)});
}

TEST(Operators, EqAndPassIf) {
  expect_series(run_op("eq $all \"value,3,*\"", {rec("a", 1, 2.0)}), {rec("a", 1, 6.0)});
  expect_series(run_op("passIf $all \"value,0,>=\"", {rec("a", 1, -1.0), rec("a", 2, 0.0)}), {rec("a", 2, 0.0)});
  expect_series(run_op("passIfFast $all minValue:1 maxValue:180", {rec("a", 1, 200.0), rec("a", 2, 0.5), rec("a", 3, 60.0)}),
                {rec("a", 3, 60.0)});
  expect_series(run_op("passIfFast $all maxValue:5", {rec("a", 1, -200.0), rec("a", 2, 6.0)}), {rec("a", 1, -200.0)});
}

TEST(Operators, PassIfReadsAuxiliaryPipeNonStrictly) {
  std::string prog =
      "$a = echo \"a\"\n$lim = echo \"lim\"\n$r = passIf $a \"value,arg1,>\" arg1:$lim\nsave $r file:\"out.evt\"\n";
  std::vector<Record> in = {rec("a", 0, 5.0), rec("lim", 1, 2.0), rec("a", 1, 3.0), rec("lim", 2, 4.0),
                            rec("a", 2, 3.0), rec("a", 3, 4.5)};
  CompiledProgram p = test::compile_text(prog);
  MemorySinkProvider sinks;
  RunReport rep = test::run_graph(p.graph, in, sinks);
  // the record at t=0 has no limit yet and is dropped with a diagnostic
  ASSERT_EQ(rep.diagnostics.size(), 1u);
  EXPECT_EQ(rep.diagnostics[0].code, Errc::unbound_arg);
  expect_series(test::parse_evt(sinks.content("out.evt")), {rec("a", 1, 3.0), rec("a", 3, 4.5)});
}

TEST(Operators, SampleExamples) {
  std::string prog = "$x = echo \"x\"\n$t = echo \"t\"\n$r = sample $x trigger:$t\nsave $r file:\"out.evt\"\n";
  expect_series(run_records(prog, {rec("x", 1, 5.0), rec("t", 2), rec("x", 4, 7.0), rec("t", 4)}),
                {rec("x", 2, 5.0), rec("x", 4, 7.0)});
  EXPECT_TRUE(run_records(prog, {rec("t", 0), rec("x", 1, 5.0)}).empty());
}

TEST(Operators, ActiveIndicator) {
  expect_series(run_op("active $all 2", {rec("x", 0, 1.0), rec("x", 10, 1.0)}),
                {rec("x_active[2]", 0, 1.0), rec("x_active[2]", 2, 0.0), rec("x_active[2]", 10, 1.0),
                 rec("x_active[2]", 12, 0.0)});
  std::vector<Record> dense;
  for (int i = 0; i < 20; ++i) dense.push_back(rec("x", i * 0.5));
  expect_series(run_op("active $all 2", dense), {rec("x_active[2]", 0, 1.0), rec("x_active[2]", 11.5, 0.0)});
  EXPECT_TRUE(run_op("active $all 2", {}).empty());
}

TEST(Operators, SinceLastExamples) {
  expect_series(run_op("sinceLast $all 5", {rec("b", 0), rec("b", 0.8), rec("b", 1.7)}),
                {rec("b_sinceLast[5]", 0.8, 0.8), rec("b_sinceLast[5]", 1.7, 1.7 - 0.8)});
  expect_series(run_op("sinceLast $all 5", {rec("b", 0), rec("b", 9), rec("b", 10)}), {rec("b_sinceLast[5]", 10, 1.0)});
}

TEST(Operators, SkipAndLayer) {
  expect_series(run_op("skip $all 3600", {rec("a", 0), rec("a", 1800), rec("a", 4000)}), {rec("a", 0), rec("a", 4000)});
  expect_series(run_op("skip $all 3600", {rec("a", 5)}), {rec("a", 5)});
  expect_series(run_op("layer $all 2 output:up", {rec("e", 0, 1.0), rec("e", 1, 3.0)}), {rec("e_layer[2]", 1, 3.0)});
  EXPECT_TRUE(run_op("layer $all 2 output:up", {rec("e", 0, 1.0), rec("e", 1, 1.5), rec("e", 2, 1.9)}).empty());
  expect_series(run_op("layer $all 2 output:down", {rec("e", 0, 2.0), rec("e", 1, 1.0), rec("e", 2, 3.0)}),
                {rec("e_layer[2]", 1, 1.0)});
}

TEST(Operators, FilterAndRename) {
  std::vector<Record> in = {rec("HR", 1, 60.0), rec("SPO2", 1, 97.0), rec("art", 2, 1.0), rec("xHR", 3, 1.0)};
  expect_series(run_op("filter $all \"(RR|HR|SPO2)\"", in), {rec("HR", 1, 60.0), rec("SPO2", 1, 97.0)});
  expect_series(run_op("filter $all \".*\"", in), in);
  expect_series(run_records("$c = echo \"HR\"\n$r = rename $c \"heartbeat\"\nsave $r file:\"out.evt\"\n", in),
                {rec("heartbeat", 1, 60.0)});
}

TEST(Operators, TickGrid) {
  std::string prog = "$t = tick 10\nsave $t file:\"out.evt\"\n";
  expect_series(run_records(prog, {rec("a", 0), rec("a", 25)}), oracle::tick(0, 25, 10));
  EXPECT_EQ(oracle::tick(0, 25, 10).size(), 3u);
  EXPECT_TRUE(run_records(prog, {rec("a", 1), rec("a", 9)}).empty());
  auto off = run_records(prog, {rec("a", 3), rec("a", 41)});
  expect_series(off, {rec("tick[10]", 10), rec("tick[10]", 20), rec("tick[10]", 30), rec("tick[10]", 40)});
}

TEST(Operators, TickWithoutInputIsConfigError) {
  CompiledProgram p = test::compile_text("$t = tick 10\nsave $t file:\"out.evt\"\n");
  MemorySinkProvider sinks;
  try {
    test::run_graph(p.graph, {}, sinks);
    FAIL() << "expected ConfigError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
  }
}

TEST(Operators, CalendarAcrossMidnight) {
  // 2004-03-22T23:00Z .. 2004-03-23T01:00Z
  double lo = 1079996400, hi = lo + 7200;
  std::string prog = "$c = calendar\nsave $c file:\"out.evt\"\n";
  auto got = run_records(prog, {rec("a", lo), rec("a", hi)});
  auto want = oracle::calendar(lo, hi);
  expect_series(got, want, 0.0);
  auto day = test::only(got, "event.day_is_Tuesday");
  ASSERT_EQ(day.size(), 1u);
  EXPECT_EQ(day[0].time, lo + 3600);
  EXPECT_EQ(test::only(got, "state.hour_is_23").size(), 2u);
  EXPECT_EQ(test::only(got, "state.hour_is_0").size(), 2u);
}

TEST(Operators, CalendarWithinOneHourAndEmptySpan) {
  std::string prog = "$c = calendar\nsave $c file:\"out.evt\"\n";
  double lo = 1079996400 + 100;
  expect_series(run_records(prog, {rec("a", lo), rec("a", lo + 50)}),
                {rec("state.hour_is_23", lo, 1.0), rec("state.hour_is_23", lo + 50, 0.0)});
  EXPECT_TRUE(run_records(prog, {rec("a", lo)}).empty());
}

TEST(Operators, CalendarRandomSpansMatchCivilTime) {
  std::mt19937 gen(17);
  std::uniform_real_distribution<double> start(0, 2e9), len(0, 3 * 86400);
  std::string prog = "$c = calendar\nsave $c file:\"out.evt\"\n";
  for (int i = 0; i < 30; ++i) {
    double lo = std::round(start(gen)), hi = lo + std::round(len(gen));
    if (i % 3 == 0) lo = std::floor(lo / 86400) * 86400;
    if (i % 5 == 0) hi = std::ceil(hi / 3600) * 3600;
    std::string d = oracle::diff(run_records(prog, {rec("a", lo), rec("a", hi)}), oracle::calendar(lo, hi), 0.0);
    ASSERT_TRUE(d.empty()) << lo << ".." << hi << "\n" << d;
  }
}

TEST(Operators, CalendarRejectsMonths) {
  EXPECT_THROW(test::compile_text("$c = calendar produce:months\nsave $c file:\"out.evt\"\n"), Error);
}

TEST(Operators, SaveWritesEmptyFileWithoutRecords) {
  CompiledProgram p = test::compile_text(oracle::single_op("echo $all"));
  MemorySinkProvider sinks;
  test::run_graph(p.graph, {}, sinks);
  EXPECT_TRUE(sinks.has("out.evt"));
  EXPECT_EQ(sinks.content("out.evt"), "");
}

TEST(Operators, SaveRoundTrip) {
  auto in = test::random_ssts(3, 4, 500);
  EXPECT_EQ(test::run_text(oracle::single_op("echo $all"), in), test::to_evt(in));
}

TEST(Operators, SaveBufferedCsvMatchesSyncedWriter) {
  auto in = test::random_ssts(5, 3, 400);
  std::vector<Timestamp> trig;
  for (const Record& r : test::only(in, "c0")) trig.push_back(r.time);
  for (bool triggered : {false, true}) {
    std::string pattern = triggered ? "part<index>.csv" : "all.csv";
    std::string prog = "$all = echo #.*\n$t = echo \"c0\"\nsaveBufferedCsv $all file:\"" + pattern + "\"" +
                       (triggered ? " trigger:$t" : "") + "\n";
    CompiledProgram p = test::compile_text(prog);
    MemorySinkProvider got, want;
    test::run_graph(p.graph, in, got);
    write_csv_synced(in, triggered ? std::span<const Timestamp>(trig) : std::span<const Timestamp>(), pattern, want);
    EXPECT_EQ(got.contents(), want.contents()) << pattern;
  }
}

TEST(Operators, SaveBufferedCsvNeedsIndexWithTrigger) {
  try {
    test::compile_text("$all = echo #.*\nsaveBufferedCsv $all file:\"x.csv\" trigger:$all\n");
    FAIL() << "expected PatternError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::pattern);
    EXPECT_EQ(e.location()->line, 2);
  }
}

TEST(Operators, TriggerOutputTimesAreTriggerTimesWithData) {
  auto in = test::random_ssts(9, 5, 600);
  auto trig = test::only(in, "c0");
  for (const char* op : {"sma", "count", "range"}) {
    auto out = run_op(std::string(op) + " $all 0.3 trigger:$t", in);
    std::set<double> trigger_times;
    for (const Record& r : trig) trigger_times.insert(r.time);
    for (const Record& r : out) EXPECT_TRUE(trigger_times.count(r.time)) << op << " " << r.time;
    // each channel emits at a trigger time iff its window is non-empty there
    for (int c = 0; c < 5; ++c) {
      std::string ch = "c" + std::to_string(c);
      auto hist = test::only(in, ch);
      std::size_t expected = 0;
      for (double t : trigger_times) {
        bool any = false;
        for (const Record& r : hist) any |= r.time >= t - 0.3 && r.time <= t;
        expected += any;
      }
      EXPECT_EQ(test::only(out, oracle::label(ch, op, {0.3})).size(), expected) << op << " " << ch;
    }
  }
}

TEST(Operators, RandomInstancesMatchOracles) {
  auto cases = oracle::cases();
  for (unsigned seed = 0; seed < 8; ++seed) {
    auto in = test::random_ssts(100 + seed, 5, 600);
    for (const auto& c : cases) {
      std::string d = oracle::diff(run_records(c.program, in), c.oracle(in), c.rel);
      ASSERT_TRUE(d.empty()) << c.name << " seed " << seed << "\n" << d;
    }
  }
}

TEST(Operators, CenteredAverageMatchesCenteredWindow) {
  std::string prog = "$all = echo #.*\n$all = echoPast $all 5\n$res = sma $all 10\nsave $res file:\"out.evt\"\n";
  for (unsigned seed = 0; seed < 3; ++seed) {
    auto in = test::random_ssts(300 + seed, 3, 500, 2.0);
    std::string d = oracle::diff(run_records(prog, in), oracle::centered_mean(in, 5));
    ASSERT_TRUE(d.empty()) << d;
  }
}

TEST(Operators, CausalityUnderTruncation) {
  auto in = test::random_ssts(77, 4, 800);
  double cut = in[in.size() / 2].time;
  std::vector<Record> prefix;
  for (const Record& r : in)
    if (r.time <= cut) prefix.push_back(r);
  auto upto = [cut](std::vector<Record> rs) {
    std::vector<Record> out;
    for (const Record& r : rs)
      if (r.time <= cut) out.push_back(r);
    return out;
  };
  for (const auto& c : oracle::cases()) {
    if (c.name.find("trigger") != std::string::npos || c.name == "sample") continue;
    std::string d = oracle::diff(upto(run_records(c.program, prefix)), upto(run_records(c.program, in)), 0.0);
    EXPECT_TRUE(d.empty()) << c.name << "\n" << d;
  }
}

TEST(Operators, ChannelPermutationInvariance) {
  auto in = test::random_ssts(55, 5, 800);
  std::map<std::string, std::string> perm = {{"c0", "c3"}, {"c1", "c0"}, {"c2", "c4"}, {"c3", "c1"}, {"c4", "c2"}};
  std::vector<Record> renamed = in;
  for (Record& r : renamed) r.channel = perm[r.channel];
  for (const char* op : {"sma", "sd", "range", "count", "tma", "ema", "normalize"}) {
    std::string line = std::string(op) + (std::string(op) == "normalize" ? " $all 3" : " $all 2");
    auto a = run_op(line, in);
    auto b = run_op(line, renamed);
    for (Record& r : a) {
      std::string base = r.channel.substr(0, 2);
      r.channel = perm[base] + r.channel.substr(2);
    }
    std::string d = oracle::diff(b, a, 0.0);
    EXPECT_TRUE(d.empty()) << op << "\n" << d;
  }
}
