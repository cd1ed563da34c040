#include "honey/operators.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <regex>
#include <unordered_map>

#include "honey/rpn.hpp"

namespace honey {

namespace {

ParamSpec chan(std::string name, bool required) { return {std::move(name), ParamType::channel, required, {}}; }
ParamSpec num(std::string name, bool required, std::optional<double> fallback = {}) {
  ParamSpec p{std::move(name), ParamType::number, required, {}};
  if (fallback) p.fallback = *fallback;
  return p;
}
ParamSpec str(std::string name, bool required, std::optional<std::string> fallback = {}) {
  ParamSpec p{std::move(name), ParamType::string, required, {}};
  if (fallback) p.fallback = *fallback;
  return p;
}
ParamSpec equation(std::string name) { return {std::move(name), ParamType::equation, true, {}}; }

std::vector<OperatorSpec> build_catalog() {
  std::vector<OperatorSpec> c;
  auto add = [&](std::string name, std::vector<ParamSpec> params) -> OperatorSpec& {
    c.push_back(OperatorSpec{std::move(name), std::move(params)});
    return c.back();
  };
  add("echo", {chan("in", true)}).keeps_names = true;
  add("filter", {chan("in", true), str("regex", true)}).keeps_names = true;
  add("rename", {chan("in", true), str("name", true), num("merge", false, 0.0)});
  for (const char* w : {"sma", "sd", "range", "count", "tma"})
    add(w, {chan("in", true), num("w", true), chan("trigger", false)});
  add("ema", {chan("in", true), num("w", true)});
  add("normalize", {chan("in", true), num("w", true), str("type", false, "meansd")});
  add("derivative", {chan("in", true)});
  add("delay", {chan("in", true), num("d", true)}).keeps_names = true;
  add("echoPast", {chan("in", true), num("w", true)}).keeps_names = true;
  auto& eq = add("eq", {chan("in", true), equation("equation")});
  eq.keeps_names = true;
  eq.arg_pipes = true;
  auto& pass = add("passIf", {chan("in", true), equation("equation")});
  pass.keeps_names = true;
  pass.arg_pipes = true;
  add("passIfFast", {chan("in", true), num("minValue", false), num("maxValue", false)}).keeps_names = true;
  add("sample", {chan("in", true), chan("trigger", true)}).keeps_names = true;
  add("active", {chan("in", true), num("w", true)});
  add("sinceLast", {chan("in", true), num("max", true), chan("trigger", false)});
  add("tick", {num("period", true)}).source = true;
  add("skip", {chan("in", true), num("w", true)}).keeps_names = true;
  add("layer", {chan("in", true), num("thresholds", true), str("output", false, "up")});
  add("calendar", {str("produce", false, "days,hours")}).source = true;
  add("save", {chan("in", true), str("file", false, "")}).sink = true;
  add("saveBufferedCsv", {chan("in", true), str("file", true), chan("trigger", false)}).sink = true;
  return c;
}

[[noreturn]] void bad_arg(const OperatorNode& node, const std::string& msg) {
  throw Error(Errc::argument, node.op_name + ": " + msg, node.loc);
}

double num_arg(const OperatorNode& node, const std::string& name) {
  const Scalar* s = node.arg(name);
  if (!s) bad_arg(node, "missing argument '" + name + "'");
  if (const double* d = std::get_if<double>(s)) return *d;
  if (auto d = parse_number(std::get<std::string>(*s))) return *d;
  bad_arg(node, "argument '" + name + "' must be a number");
}

std::optional<double> opt_num_arg(const OperatorNode& node, const std::string& name) {
  if (!node.arg(name)) return std::nullopt;
  return num_arg(node, name);
}

std::string str_arg(const OperatorNode& node, const std::string& name) {
  const Scalar* s = node.arg(name);
  if (!s) return {};
  return scalar_text(*s);
}

bool has_arg(const OperatorNode& node, const std::string& name) { return node.arg(name) != nullptr; }

double positive(const OperatorNode& node, const std::string& name) {
  double v = num_arg(node, name);
  if (!(v > 0.0)) bad_arg(node, "'" + name + "' must be > 0");
  return v;
}

// Per-channel state kept in order of first appearance.
template <class State>
class ChannelTable {
 public:
  template <class Init>
  State& get(const std::string& channel, Init&& init) {
    auto it = index_.find(channel);
    if (it != index_.end()) return items_[it->second].second;
    index_.emplace(channel, items_.size());
    items_.emplace_back(channel, init(channel));
    return items_.back().second;
  }
  std::vector<std::pair<std::string, State>>& items() { return items_; }
  const std::vector<std::pair<std::string, State>>& items() const { return items_; }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::pair<std::string, State>> items_;
};

// Drops triggers repeating the previous trigger's time stamp.
class TriggerGate {
 public:
  bool accept(Timestamp t) {
    if (last_ && *last_ == t) return false;
    last_ = t;
    return true;
  }

 private:
  std::optional<Timestamp> last_;
};

class EchoOp : public Operator {
 public:
  void on_record(int, const Record& r, OpContext& ctx) override { ctx.emit(r); }
};

class FilterOp : public Operator {
 public:
  explicit FilterOp(const OperatorNode& node) {
    std::string pattern = str_arg(node, "regex");
    try {
      re_ = std::regex(pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw Error(Errc::regex, "filter: invalid regex '" + pattern + "': " + e.what(), node.loc);
    }
  }
  void on_record(int, const Record& r, OpContext& ctx) override {
    auto it = cache_.find(r.channel);
    if (it == cache_.end()) it = cache_.emplace(r.channel, std::regex_match(r.channel, re_)).first;
    if (it->second) ctx.emit(r);
  }

 private:
  std::regex re_;
  std::unordered_map<std::string, bool> cache_;
};

class RenameOp : public Operator {
 public:
  explicit RenameOp(const OperatorNode& node)
      : name_(str_arg(node, "name")), merge_(opt_num_arg(node, "merge").value_or(0.0) != 0.0), loc_(node.loc) {
    if (!is_valid_channel_name(name_)) bad_arg(node, "invalid channel name '" + name_ + "'");
  }
  void on_record(int, const Record& r, OpContext& ctx) override {
    if (!merge_) {
      if (!first_) {
        first_ = r.channel;
      } else if (*first_ != r.channel) {
        throw Error(Errc::rename_collision,
                    "rename: channels '" + *first_ + "' and '" + r.channel + "' would both become '" + name_ + "'",
                    loc_);
      }
    }
    Record out = r;
    out.channel = name_;
    ctx.emit(std::move(out));
  }

 private:
  std::string name_;
  bool merge_;
  SourceLocation loc_;
  std::optional<std::string> first_;
};

enum class Stat { sma, sd, range, count, tma };

struct Window {
  std::string out;
  std::deque<std::pair<Timestamp, double>> buf;
};

void evict(Window& w, Timestamp t, double len) {
  const Timestamp lo = t - len;
  while (!w.buf.empty() && w.buf.front().first < lo) w.buf.pop_front();
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

MeanSd mean_sd(const std::deque<std::pair<Timestamp, double>>& buf) {
  double sum = 0.0, lo = buf.front().second, hi = lo;
  for (const auto& [t, v] : buf) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  MeanSd out;
  out.mean = sum / static_cast<double>(buf.size());
  if (lo == hi) return out;
  double acc = 0.0;
  for (const auto& [t, v] : buf) acc += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(acc / static_cast<double>(buf.size()));
  return out;
}

class WindowOp : public Operator {
 public:
  WindowOp(const OperatorNode& node, Stat stat)
      : node_(node), stat_(stat), w_(positive(node, "w")), triggered_(has_arg(node, "trigger")) {}

  void on_record(int port, const Record& r, OpContext& ctx) override {
    if (port == kTriggerPort) {
      if (!gate_.accept(r.time)) return;
      for (auto& [channel, win] : chans_.items()) {
        evict(win, r.time, w_);
        if (auto v = compute(win, r.time)) ctx.emit(Record{win.out, r.time, *v});
      }
      recount();
      return;
    }
    Window& win = chans_.get(r.channel, [&](const std::string& c) {
      return Window{derived_channel_name(c, node_), {}};
    });
    win.buf.emplace_back(r.time, r.numeric());
    evict(win, r.time, w_);
    peak_ = std::max(peak_, win.buf.size());
    recount();
    if (!triggered_)
      if (auto v = compute(win, r.time)) ctx.emit(Record{win.out, r.time, *v});
  }

  std::size_t retained() const override { return count_; }
  std::size_t peak_channel_retained() const override { return peak_; }

 private:
  void recount() {
    count_ = 0;
    for (const auto& [c, win] : chans_.items()) count_ += win.buf.size();
  }

  std::optional<double> compute(const Window& win, Timestamp t) const {
    if (win.buf.empty()) return std::nullopt;
    const auto& buf = win.buf;
    switch (stat_) {
      case Stat::count: return static_cast<double>(buf.size());
      case Stat::sma: {
        double sum = 0.0;
        for (const auto& [s, v] : buf) sum += v;
        return sum / static_cast<double>(buf.size());
      }
      case Stat::sd: return mean_sd(buf).sd;
      case Stat::range: {
        double lo = buf.front().second, hi = lo;
        for (const auto& [s, v] : buf) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        return hi - lo;
      }
      case Stat::tma: {
        double total = 0.0, acc = 0.0;
        for (const auto& [s, v] : buf) {
          double weight = (w_ - (t - s)) / w_;
          total += weight;
          acc += weight * v;
        }
        if (!(total > 0.0)) return std::nullopt;
        return acc / total;
      }
    }
    return std::nullopt;
  }

  OperatorNode node_;
  Stat stat_;
  double w_;
  bool triggered_;
  TriggerGate gate_;
  ChannelTable<Window> chans_;
  std::size_t count_ = 0;
  std::size_t peak_ = 0;
};

class EmaOp : public Operator {
 public:
  explicit EmaOp(const OperatorNode& node) : node_(node), w_(positive(node, "w")) {}

  void on_record(int, const Record& r, OpContext& ctx) override {
    State& s = chans_.get(r.channel, [&](const std::string& c) { return State{derived_channel_name(c, node_)}; });
    double v = r.numeric();
    if (!s.last) {
      s.y = v;
    } else {
      double alpha = 1.0 - std::exp(-(r.time - *s.last) / w_);
      s.y = alpha * v + (1.0 - alpha) * s.y;
    }
    s.last = r.time;
    ctx.emit(Record{s.out, r.time, s.y});
  }
  std::size_t retained() const override { return chans_.items().size(); }
  std::size_t peak_channel_retained() const override { return chans_.items().empty() ? 0 : 1; }

 private:
  struct State {
    std::string out;
    std::optional<Timestamp> last;
    double y = 0.0;
  };
  OperatorNode node_;
  double w_;
  ChannelTable<State> chans_;
};

class NormalizeOp : public Operator {
 public:
  explicit NormalizeOp(const OperatorNode& node) : node_(node), w_(positive(node, "w")) {
    if (str_arg(node, "type") != "meansd") bad_arg(node, "only type:meansd is supported");
  }

  void on_record(int, const Record& r, OpContext& ctx) override {
    Window& win = chans_.get(r.channel, [&](const std::string& c) {
      return Window{derived_channel_name(c, node_), {}};
    });
    win.buf.emplace_back(r.time, r.numeric());
    evict(win, r.time, w_);
    peak_ = std::max(peak_, win.buf.size());
    MeanSd m = mean_sd(win.buf);
    if (m.sd == 0.0) return;
    ctx.emit(Record{win.out, r.time, (r.numeric() - m.mean) / m.sd});
  }
  std::size_t retained() const override {
    std::size_t n = 0;
    for (const auto& [c, w] : chans_.items()) n += w.buf.size();
    return n;
  }
  std::size_t peak_channel_retained() const override { return peak_; }

 private:
  OperatorNode node_;
  double w_;
  ChannelTable<Window> chans_;
  std::size_t peak_ = 0;
};

class DerivativeOp : public Operator {
 public:
  explicit DerivativeOp(const OperatorNode& node) : node_(node) {}

  void on_record(int, const Record& r, OpContext& ctx) override {
    State& s = chans_.get(r.channel, [&](const std::string& c) { return State{derived_channel_name(c, node_)}; });
    double v = r.numeric();
    if (s.prev) {
      if (r.time == s.prev->first) {
        ctx.diag(Errc::math, "derivative: two records of '" + r.channel + "' at time " + format_number(r.time));
      } else {
        ctx.emit(Record{s.out, r.time, (v - s.prev->second) / (r.time - s.prev->first)});
      }
    }
    s.prev = std::make_pair(r.time, v);
  }
  std::size_t retained() const override { return chans_.items().size(); }
  std::size_t peak_channel_retained() const override { return chans_.items().empty() ? 0 : 1; }

 private:
  struct State {
    std::string out;
    std::optional<std::pair<Timestamp, double>> prev;
  };
  OperatorNode node_;
  ChannelTable<State> chans_;
};

class DelayOp : public Operator {
 public:
  explicit DelayOp(const OperatorNode& node) : d_(num_arg(node, "d")) {
    if (!(d_ >= 0.0)) bad_arg(node, "'d' must be >= 0");
  }

  void on_record(int, const Record& r, OpContext& ctx) override {
    if (d_ == 0.0) {
      ctx.emit(r);
      return;
    }
    Record held = r;
    held.time = r.time + d_;
    if (!std::isfinite(held.time)) {
      ctx.diag(Errc::math, "delay: time overflow");
      return;
    }
    ctx.schedule(held.time, TimerPhase::pre);
    buf_.push_back(std::move(held));
    peak_ = std::max(peak_, buf_.size());
  }

  void on_timer(Timestamp t, OpContext& ctx) override {
    while (!buf_.empty() && buf_.front().time <= t) {
      ctx.emit(std::move(buf_.front()));
      buf_.pop_front();
    }
  }

  std::size_t retained() const override { return buf_.size(); }
  std::size_t peak_channel_retained() const override { return peak_; }
  double shift() const override { return d_; }

 private:
  double d_;
  std::deque<Record> buf_;
  std::size_t peak_ = 0;
};

class EchoPastOp : public Operator {
 public:
  explicit EchoPastOp(const OperatorNode& node) : w_(positive(node, "w")) {}
  void on_record(int, const Record& r, OpContext& ctx) override {
    Record out = r;
    out.time = r.time - w_;
    ctx.emit(std::move(out));
  }
  double shift() const override { return -w_; }

 private:
  double w_;
};

RpnProgram equation_arg(const OperatorNode& node) {
  const Scalar* s = node.arg("equation");
  if (!s) bad_arg(node, "missing equation");
  if (const double* d = std::get_if<double>(s)) return RpnProgram::constant(*d);
  try {
    return RpnProgram::compile(std::get<std::string>(*s), RpnKind::record);
  } catch (const Error& e) {
    throw Error(e.code(), node.op_name + ": " + e.message(), node.loc);
  }
}

class EquationOp : public Operator {
 public:
  EquationOp(const OperatorNode& node, bool filter)
      : prog_(equation_arg(node)), filter_(filter), name_(node.op_name),
        args_(static_cast<std::size_t>(prog_.max_arg())) {}

  void on_record(int port, const Record& r, OpContext& ctx) override {
    if (port >= 1) {
      auto k = static_cast<std::size_t>(port);
      if (k <= args_.size()) args_[k - 1] = r.numeric();
      return;
    }
    double v;
    try {
      v = prog_.eval_record(r.numeric(), r.time, args_);
    } catch (const Error& e) {
      ctx.diag(e.code(), name_ + ": record (" + r.channel + "," + format_number(r.time) + ") dropped: " + e.message());
      return;
    }
    if (filter_) {
      if (v != 0.0) ctx.emit(r);
    } else {
      ctx.emit(Record{r.channel, r.time, v});
    }
  }
  std::size_t retained() const override { return args_.size(); }

 private:
  RpnProgram prog_;
  bool filter_;
  std::string name_;
  std::vector<std::optional<double>> args_;
};

class PassIfFastOp : public Operator {
 public:
  explicit PassIfFastOp(const OperatorNode& node)
      : lo_(opt_num_arg(node, "minValue")), hi_(opt_num_arg(node, "maxValue")) {}
  void on_record(int, const Record& r, OpContext& ctx) override {
    double v = r.numeric();
    if (lo_ && v < *lo_) return;
    if (hi_ && v > *hi_) return;
    ctx.emit(r);
  }

 private:
  std::optional<double> lo_, hi_;
};

class SampleOp : public Operator {
 public:
  void on_record(int port, const Record& r, OpContext& ctx) override {
    if (port == kTriggerPort) {
      if (!gate_.accept(r.time)) return;
      for (const auto& [channel, value] : chans_.items()) ctx.emit(Record{channel, r.time, value});
      return;
    }
    chans_.get(r.channel, [](const std::string&) { return std::optional<double>(); }) = r.value;
  }
  std::size_t retained() const override { return chans_.items().size(); }
  std::size_t peak_channel_retained() const override { return chans_.items().empty() ? 0 : 1; }

 private:
  TriggerGate gate_;
  ChannelTable<std::optional<double>> chans_;
};

class ActiveOp : public Operator {
 public:
  explicit ActiveOp(const OperatorNode& node) : node_(node), w_(positive(node, "w")) {}

  void on_record(int, const Record& r, OpContext& ctx) override {
    State& s = chans_.get(r.channel, [&](const std::string& c) { return State{derived_channel_name(c, node_)}; });
    if (!s.active) {
      s.active = true;
      ctx.emit(Record{s.out, r.time, 1.0});
    }
    s.last = r.time;
    ctx.schedule(r.time + w_, TimerPhase::post);
  }

  void on_timer(Timestamp t, OpContext& ctx) override {
    for (auto& [c, s] : chans_.items()) {
      if (s.active && s.last + w_ <= t) {
        s.active = false;
        ctx.emit(Record{s.out, s.last + w_, 0.0});
      }
    }
  }
  std::size_t retained() const override { return chans_.items().size(); }

 private:
  struct State {
    std::string out;
    bool active = false;
    Timestamp last = 0.0;
  };
  OperatorNode node_;
  double w_;
  ChannelTable<State> chans_;
};

class SinceLastOp : public Operator {
 public:
  explicit SinceLastOp(const OperatorNode& node)
      : node_(node), max_(num_arg(node, "max")), triggered_(has_arg(node, "trigger")) {}

  void on_record(int port, const Record& r, OpContext& ctx) override {
    if (port == kTriggerPort) {
      if (!gate_.accept(r.time)) return;
      for (const auto& [c, s] : chans_.items()) {
        double d = r.time - s.last;
        if (d <= max_) ctx.emit(Record{s.out, r.time, d});
      }
      return;
    }
    bool fresh = false;
    State& s = chans_.get(r.channel, [&](const std::string& c) {
      fresh = true;
      return State{derived_channel_name(c, node_), r.time};
    });
    if (!triggered_ && !fresh) {
      double d = r.time - s.last;
      if (d <= max_) ctx.emit(Record{s.out, r.time, d});
    }
    s.last = r.time;
  }
  std::size_t retained() const override { return chans_.items().size(); }

 private:
  struct State {
    std::string out;
    Timestamp last = 0.0;
  };
  OperatorNode node_;
  double max_;
  bool triggered_;
  TriggerGate gate_;
  ChannelTable<State> chans_;
};

// Offline source operators need the time span of the input data.
void require_span(const OpContext& ctx, const OperatorNode& node) {
  if (!ctx.span().first)
    throw Error(Errc::config, node.op_name + ": no input records to take time bounds from", node.loc);
}

class TickOp : public Operator {
 public:
  void on_record(int, const Record&, OpContext&) override {}
  void on_flush(OpContext& ctx) override { require_span(ctx, node_); }
  explicit TickOp(const OperatorNode& node) : node_(node), p_(positive(node, "period")) {
    channel_ = "tick[" + format_number(p_) + "]";
  }

  void on_start(OpContext& ctx) override {
    if (!ctx.span().first) return;
    Timestamp first = *ctx.span().first;
    k_ = std::ceil(first / p_);
    while ((k_ - 1) * p_ >= first) k_ -= 1;
    while (k_ * p_ < first) k_ += 1;
    ctx.schedule(k_ * p_, TimerPhase::post);
    running_ = true;
  }

  void on_timer(Timestamp t, OpContext& ctx) override {
    if (!running_) return;
    const DataSpan& span = ctx.span();
    while (k_ * p_ <= t) {
      Timestamp at = k_ * p_;
      if (span.known_max && at <= *span.known_max) {
        ctx.emit(Record{channel_, at, std::nullopt});
        k_ += 1;
      } else {
        if (span.complete) running_ = false;
        break;
      }
    }
    if (running_) ctx.schedule(k_ * p_, TimerPhase::post);
  }

 private:
  OperatorNode node_;
  double p_;
  double k_ = 0.0;
  bool running_ = false;
  std::string channel_;
};

class SkipOp : public Operator {
 public:
  explicit SkipOp(const OperatorNode& node) : w_(positive(node, "w")) {}
  void on_record(int, const Record& r, OpContext& ctx) override {
    auto& last = chans_.get(r.channel, [](const std::string&) { return std::optional<Timestamp>(); });
    if (!last || r.time - *last > w_) {
      last = r.time;
      ctx.emit(r);
    }
  }
  std::size_t retained() const override { return chans_.items().size(); }

 private:
  double w_;
  ChannelTable<std::optional<Timestamp>> chans_;
};

class LayerOp : public Operator {
 public:
  explicit LayerOp(const OperatorNode& node) : node_(node), v_(num_arg(node, "thresholds")) {
    std::string dir = str_arg(node, "output");
    if (dir == "up") {
      up_ = true;
    } else if (dir == "down") {
      up_ = false;
    } else {
      bad_arg(node, "output must be 'up' or 'down', got '" + dir + "'");
    }
  }

  void on_record(int, const Record& r, OpContext& ctx) override {
    State& s = chans_.get(r.channel, [&](const std::string& c) { return State{derived_channel_name(c, node_)}; });
    double cur = r.numeric();
    if (s.prev) {
      bool cross = up_ ? (*s.prev <= v_ && cur > v_) : (*s.prev >= v_ && cur < v_);
      if (cross) ctx.emit(Record{s.out, r.time, cur});
    }
    s.prev = cur;
  }
  std::size_t retained() const override { return chans_.items().size(); }

 private:
  struct State {
    std::string out;
    std::optional<double> prev;
  };
  OperatorNode node_;
  double v_;
  bool up_ = true;
  ChannelTable<State> chans_;
};

const char* const kWeekdays[] = {"Sunday", "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday"};

class CalendarOp : public Operator {
 public:
  void on_record(int, const Record&, OpContext&) override {}
  void on_flush(OpContext& ctx) override { require_span(ctx, node_); }
  explicit CalendarOp(const OperatorNode& node) : node_(node) {
    std::string produce = str_arg(node, "produce");
    std::size_t start = 0;
    while (start <= produce.size()) {
      std::size_t comma = produce.find(',', start);
      std::string item = produce.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (item == "days") {
        days_ = true;
      } else if (item == "hours") {
        hours_ = true;
      } else {
        bad_arg(node, "unsupported production '" + item + "' (expected days, hours)");
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }

  void on_start(OpContext& ctx) override {
    if (ctx.span().first) ctx.schedule(*ctx.span().first, TimerPhase::post);
  }

  void on_timer(Timestamp t, OpContext& ctx) override {
    if (closed_) return;
    const DataSpan& span = ctx.span();
    if (!span.first || !span.known_max) return;
    const Timestamp t_min = *span.first;
    const Timestamp known = *span.known_max;
    if (!started_) {
      if (!(known > t_min)) {
        if (span.complete) closed_ = true;
        return;
      }
      started_ = true;
      hour_ = static_cast<long long>(std::floor(t_min / 3600.0));
      if (hours_) ctx.emit(Record{hour_channel(hour_), t_min, 1.0});
      if (days_ && std::fmod(t_min, 86400.0) == 0.0) ctx.emit(day_event(t_min));
    }
    for (Timestamp b = boundary(); b <= t && b < known; b = boundary()) {
      if (hours_) {
        ctx.emit(Record{hour_channel(hour_), b, 0.0});
        ctx.emit(Record{hour_channel(hour_ + 1), b, 1.0});
      }
      ++hour_;
      if (days_ && floor_mod(hour_, 24) == 0) ctx.emit(day_event(b));
    }
    if (span.complete && boundary() >= known) {
      Timestamp b = boundary();
      if (days_ && b == known && floor_mod(hour_ + 1, 24) == 0) ctx.emit(day_event(b));
      if (hours_) ctx.emit(Record{hour_channel(hour_), known, 0.0});
      closed_ = true;
      return;
    }
    ctx.schedule(boundary(), TimerPhase::post);
  }

  Timestamp pending_bound(const DataSpan& span) const override {
    if (started_ && !closed_ && span.known_max) return *span.known_max;
    return kInfinity;
  }

 private:
  static long long floor_mod(long long a, long long m) { return ((a % m) + m) % m; }
  Timestamp boundary() const { return static_cast<double>(hour_ + 1) * 3600.0; }
  static std::string hour_channel(long long hour_index) {
    return "state.hour_is_" + std::to_string(floor_mod(hour_index, 24));
  }
  static Record day_event(Timestamp midnight) {
    auto day = static_cast<long long>(std::floor(midnight / 86400.0));
    return Record{std::string("event.day_is_") + kWeekdays[floor_mod(day + 4, 7)], midnight, std::nullopt};
  }

  OperatorNode node_;
  bool days_ = false;
  bool hours_ = false;
  bool started_ = false;
  bool closed_ = false;
  long long hour_ = 0;
};

class SaveOp : public Operator {
 public:
  explicit SaveOp(const OperatorNode& node) : path_(str_arg(node, "file")), loc_(node.loc) {}

  void on_start(OpContext& ctx) override {
    if (path_.empty()) throw Error(Errc::config, "save: no output file", loc_);
    out_ = ctx.sinks().open(path_);
  }
  void on_record(int, const Record& r, OpContext&) override {
    *out_ << format_evt_line(r) << '\n';
    if (!*out_) throw Error(Errc::io, "cannot write '" + path_ + "'", loc_);
  }
  void on_flush(OpContext&) override {
    if (!out_) return;
    out_->flush();
    if (!*out_) throw Error(Errc::io, "cannot write '" + path_ + "'", loc_);
    out_.reset();
  }

 private:
  std::string path_;
  SourceLocation loc_;
  std::unique_ptr<std::ostream> out_;
};

class SaveCsvOp : public Operator {
 public:
  explicit SaveCsvOp(const OperatorNode& node)
      : pattern_(str_arg(node, "file")), triggered_(has_arg(node, "trigger")), loc_(node.loc) {
    if (triggered_ && !has_index_placeholder(pattern_))
      throw Error(Errc::pattern, "saveBufferedCsv: file pattern '" + pattern_ + "' needs <index> when a trigger is given",
                  node.loc);
  }

  void on_record(int port, const Record& r, OpContext& ctx) override {
    if (port == kTriggerPort) {
      if (gate_.accept(r.time)) write(ctx);
      return;
    }
    buffer_.add(r);
  }
  void on_flush(OpContext& ctx) override {
    if (!triggered_ || !buffer_.empty()) write(ctx);
  }
  std::size_t retained() const override { return buffer_.size(); }

 private:
  void write(OpContext& ctx) {
    std::string path = triggered_ ? expand_index_pattern(pattern_, index_++) : pattern_;
    auto out = ctx.sinks().open(path);
    buffer_.write(*out);
    out->flush();
    if (!*out) throw Error(Errc::io, "cannot write '" + path + "'", loc_);
    buffer_.clear();
  }

  std::string pattern_;
  bool triggered_;
  SourceLocation loc_;
  TriggerGate gate_;
  SyncedCsvBuffer buffer_;
  std::size_t index_ = 0;
};

}  // namespace

const std::vector<OperatorSpec>& operator_catalog() {
  static const std::vector<OperatorSpec> catalog = build_catalog();
  return catalog;
}

const OperatorSpec* find_operator(std::string_view name) {
  for (const auto& spec : operator_catalog())
    if (spec.name == name) return &spec;
  return nullptr;
}

int port_id(const std::string& name) {
  if (name == "in") return kMainPort;
  if (name == "trigger") return kTriggerPort;
  if (name.size() > 3 && name.compare(0, 3, "arg") == 0) return std::stoi(name.substr(3));
  throw Error(Errc::internal, "unknown port '" + name + "'");
}

std::string port_name(int port) {
  if (port == kMainPort) return "in";
  if (port == kTriggerPort) return "trigger";
  return "arg" + std::to_string(port);
}

int port_rank(int port) {
  if (port == kMainPort) return 1000;
  if (port == kTriggerPort) return 2000;
  return port;
}

std::string derived_channel_name(const std::string& channel, const OperatorNode& node) {
  std::string out = channel + "_" + node.op_name;
  if (!node.label_params.empty()) {
    out += '[';
    for (std::size_t i = 0; i < node.label_params.size(); ++i) {
      if (i) out += ',';
      out += node.label_params[i];
    }
    out += ']';
  }
  return out;
}

std::unique_ptr<Operator> make_operator(const OperatorNode& node) {
  const std::string& op = node.op_name;
  if (op == "echo") return std::make_unique<EchoOp>();
  if (op == "filter") return std::make_unique<FilterOp>(node);
  if (op == "rename") return std::make_unique<RenameOp>(node);
  if (op == "sma") return std::make_unique<WindowOp>(node, Stat::sma);
  if (op == "sd") return std::make_unique<WindowOp>(node, Stat::sd);
  if (op == "range") return std::make_unique<WindowOp>(node, Stat::range);
  if (op == "count") return std::make_unique<WindowOp>(node, Stat::count);
  if (op == "tma") return std::make_unique<WindowOp>(node, Stat::tma);
  if (op == "ema") return std::make_unique<EmaOp>(node);
  if (op == "normalize") return std::make_unique<NormalizeOp>(node);
  if (op == "derivative") return std::make_unique<DerivativeOp>(node);
  if (op == "delay") return std::make_unique<DelayOp>(node);
  if (op == "echoPast") return std::make_unique<EchoPastOp>(node);
  if (op == "eq") return std::make_unique<EquationOp>(node, false);
  if (op == "passIf") return std::make_unique<EquationOp>(node, true);
  if (op == "passIfFast") return std::make_unique<PassIfFastOp>(node);
  if (op == "sample") return std::make_unique<SampleOp>();
  if (op == "active") return std::make_unique<ActiveOp>(node);
  if (op == "sinceLast") return std::make_unique<SinceLastOp>(node);
  if (op == "tick") return std::make_unique<TickOp>(node);
  if (op == "skip") return std::make_unique<SkipOp>(node);
  if (op == "layer") return std::make_unique<LayerOp>(node);
  if (op == "calendar") return std::make_unique<CalendarOp>(node);
  if (op == "save") return std::make_unique<SaveOp>(node);
  if (op == "saveBufferedCsv") return std::make_unique<SaveCsvOp>(node);
  throw Error(Errc::unknown_operator, "unknown operator '" + op + "'", node.loc);
}

}  // namespace honey
