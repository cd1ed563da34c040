#include "honey/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <memory>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_map>

#include "honey/operators.hpp"

namespace honey {

namespace {

constexpr Timestamp kNegInfinity = -kInfinity;
constexpr std::size_t kMaxStoredDiagnostics = 1000;

struct Queue {
  int port = kMainPort;
  int rank = 0;
  long producer = -1;  // -1: the dataset sources
  bool back_edge = false;
  std::deque<Record> items;
};

class Engine;

class NodeContext : public OpContext {
 public:
  NodeContext(Engine* engine, NodeId id) : engine_(engine), id_(id) {}
  void emit(Record r) override;
  void schedule(Timestamp t, TimerPhase phase) override;
  const DataSpan& span() const override;
  void diag(Errc code, std::string message) override;
  SinkProvider& sinks() override;

 private:
  Engine* engine_;
  NodeId id_;
};

struct Node {
  const OperatorNode* def = nullptr;
  std::unique_ptr<Operator> op;
  std::unique_ptr<NodeContext> ctx;
  std::vector<Queue> queues;
  int source_queue = -1;
  bool reads_source = false;
  bool exact = false;
  std::optional<std::regex> re;
  std::unordered_map<std::string, bool> matches;
  std::set<Timestamp> pre, post;
  std::vector<std::pair<NodeId, std::size_t>> consumers;
  double shift = 0.0;
  Timestamp w_out = kNegInfinity;
  Timestamp w_next = kInfinity;
  std::optional<Timestamp> last_emit;
  std::vector<Record>* materialize = nullptr;
  std::size_t queued = 0;
  NodeStats stats;
};

Error at_node(const Error& e, const OperatorNode& def) {
  if (e.location()) return e;
  return Error(e.code(), e.message(), def.loc);
}

class Engine {
 public:
  Engine(const FlowGraph& graph, SinkProvider& sinks, const RunOptions& options, ExecMode mode)
      : graph_(graph), sinks_(sinks), options_(options), mode_(mode) {
    for (const Diagnostic& d : validate(graph, mode))
      if (d.severity == Severity::error) throw Error(d.code, d.message, d.loc);

    const std::size_t n = graph.nodes.size();
    nodes_.resize(n);
    for (NodeId id = 0; id < n; ++id) {
      Node& u = nodes_[id];
      u.def = &graph.nodes[id];
      try {
        u.op = make_operator(*u.def);
      } catch (const Error& e) {
        throw at_node(e, *u.def);
      }
      u.ctx = std::make_unique<NodeContext>(this, id);
      u.shift = u.op->shift();
      u.stats.id = id;
      u.stats.op = u.def->op_name;
      if (u.def->source) {
        u.reads_source = true;
        if (u.def->source->kind == Selection::Kind::exact) {
          u.exact = true;
        } else {
          u.re.emplace(u.def->source->pattern, std::regex::ECMAScript);
        }
      }
      if (u.def->source || u.def->needs_span) u.queues.push_back(Queue{kMainPort, port_rank(kMainPort), -1, false, {}});
    }
    for (const Pipe& p : graph.pipes) {
      int port = port_id(p.port);
      nodes_[p.to].queues.push_back(Queue{port, port_rank(port), static_cast<long>(p.from), p.recursive_back_edge, {}});
    }
    for (NodeId id = 0; id < n; ++id) {
      Node& u = nodes_[id];
      std::stable_sort(u.queues.begin(), u.queues.end(), [](const Queue& a, const Queue& b) {
        return std::tie(a.rank, a.producer) < std::tie(b.rank, b.producer);
      });
      for (std::size_t qi = 0; qi < u.queues.size(); ++qi) {
        const Queue& q = u.queues[qi];
        if (q.producer < 0) {
          u.source_queue = static_cast<int>(qi);
        } else {
          nodes_[static_cast<std::size_t>(q.producer)].consumers.emplace_back(id, qi);
        }
      }
      if (u.reads_source) source_nodes_.push_back(id);
    }
    cyclic_ = graph.is_cyclic();
  }

  RunReport run_streaming(RecordSource& source) {
    auto started = std::chrono::steady_clock::now();
    order_ = topological_order(graph_);
    if (const Record* first = source.peek()) {
      span_.first = first->time;
      span_.known_max = first->time;
      w_data_ = w_span_ = first->time;
    } else {
      span_.complete = true;
      w_data_ = w_span_ = kInfinity;
    }
    start_all();
    quiesce();
    Timestamp last = kNegInfinity;
    while (auto r = source.next()) {
      check_source_record(*r, last);
      last = r->time;
      ++records_read_;
      const Record* nx = source.peek();
      span_.known_max = std::max(*span_.known_max, r->time);
      if (nx) {
        if (nx->time < r->time)
          throw Error(Errc::order, "source time decreases from " + format_number(r->time) + " to " +
                                       format_number(nx->time) + " (channel " + nx->channel + ")");
        span_.known_max = std::max(*span_.known_max, nx->time);
      }
      inject(*r);
      if (nx) {
        w_data_ = w_span_ = nx->time;
      } else {
        w_data_ = w_span_ = kInfinity;
        span_.complete = true;
      }
      back_deliveries_ = 0;
      quiesce();
      observe(*r);
    }
    quiesce();
    finish();
    return report(started);
  }

  RunReport run_static(RecordSource& source) {
    auto started = std::chrono::steady_clock::now();
    static_ = true;
    std::vector<Record> records;
    Timestamp last = kNegInfinity;
    while (auto r = source.next()) {
      check_source_record(*r, last);
      last = r->time;
      records.push_back(std::move(*r));
    }
    records_read_ = records.size();
    if (!records.empty()) {
      span_.first = records.front().time;
      span_.known_max = records.back().time;
    }
    span_.complete = true;
    w_data_ = w_span_ = kInfinity;
    order_ = full_topological_order(graph_);

    const std::size_t n = nodes_.size();
    std::vector<std::size_t> position(n), last_use(n, 0);
    for (std::size_t pos = 0; pos < order_.size(); ++pos) position[order_[pos]] = pos;
    for (NodeId id = 0; id < n; ++id)
      for (const auto& [to, qi] : nodes_[id].consumers) last_use[id] = std::max(last_use[id], position[to]);

    std::vector<std::unique_ptr<std::vector<Record>>> outputs(n);
    auto release = [&](NodeId id) {
      if (!outputs[id]) return;
      buffered_ -= outputs[id]->size();
      outputs[id].reset();
      events_.push_back(LedgerEvent{LedgerEvent::Kind::release, id, graph_.nodes[id].op_name});
    };

    for (std::size_t pos = 0; pos < order_.size(); ++pos) {
      NodeId id = order_[pos];
      Node& u = nodes_[id];
      for (Queue& q : u.queues) {
        if (q.producer < 0) {
          if (!u.reads_source) continue;
          for (const Record& r : records)
            if (matches(u, r.channel)) q.items.push_back(r);
        } else {
          const auto& src = outputs[static_cast<std::size_t>(q.producer)];
          if (!src) throw Error(Errc::internal, "static schedule read a released buffer");
          q.items.assign(src->begin(), src->end());
        }
        u.queued += q.items.size();
        u.stats.peak_queued = std::max(u.stats.peak_queued, u.queued);
      }
      if (!find_operator(u.def->op_name)->sink) {
        outputs[id] = std::make_unique<std::vector<Record>>();
        u.materialize = outputs[id].get();
      }
      start(id);
      run_node(id);
      if (u.queued != 0 || !u.pre.empty() || !u.post.empty())
        throw Error(Errc::internal, "node #" + std::to_string(id) + " did not drain", u.def->loc);
      u.materialize = nullptr;
      events_.push_back(LedgerEvent{LedgerEvent::Kind::run, id, u.def->op_name});

      std::vector<NodeId> producers;
      for (const Queue& q : u.queues)
        if (q.producer >= 0) producers.push_back(static_cast<NodeId>(q.producer));
      std::sort(producers.begin(), producers.end());
      producers.erase(std::unique(producers.begin(), producers.end()), producers.end());
      for (NodeId p : producers)
        if (last_use[p] == pos) release(p);
      if (u.consumers.empty()) release(id);
    }
    flush_all();
    return report(started);
  }

  RunReport run_realtime(LiveSource& source, Clock& clock, double poll_interval) {
    auto started = std::chrono::steady_clock::now();
    order_ = topological_order(graph_);
    double now = clock.now();
    span_.first = now;
    span_.known_max = now;
    w_span_ = now;
    w_data_ = kNegInfinity;
    start_all();
    quiesce();
    Timestamp last = kNegInfinity;
    while (true) {
      LiveSource::Poll p = source.poll(poll_interval);
      now = clock.now();
      if (now > *span_.known_max) span_.known_max = now;
      w_span_ = std::max(w_span_, now);
      if (p.status == LiveSource::Status::end) {
        w_data_ = w_span_ = kInfinity;
        span_.complete = true;
        back_deliveries_ = 0;
        quiesce();
        break;
      }
      if (p.status == LiveSource::Status::record) {
        check_source_record(p.record, last);
        last = p.record.time;
        ++records_read_;
        inject(p.record);
        w_data_ = p.record.time;
        back_deliveries_ = 0;
        quiesce();
        observe(p.record);
      } else {
        quiesce();
      }
    }
    finish();
    return report(started);
  }

  // ---- called through NodeContext ----------------------------------------

  void emit(NodeId id, Record r) {
    Node& u = nodes_[id];
    if (!std::isfinite(r.time) || (r.value && !std::isfinite(*r.value))) {
      diag(id, Errc::math, "non-finite record on '" + r.channel + "' dropped");
      return;
    }
    if (!is_valid_channel_name(r.channel)) throw Error(Errc::argument, "invalid channel name '" + r.channel + "'", u.def->loc);
    if (u.last_emit && r.time < *u.last_emit)
      throw Error(Errc::time_travel, u.def->op_name + " emitted time " + format_number(r.time) + " after " +
                                         format_number(*u.last_emit), u.def->loc);
    if (!static_ && r.time < u.w_out)
      throw Error(Errc::time_travel, u.def->op_name + " emitted time " + format_number(r.time) +
                                         " below its watermark " + format_number(u.w_out), u.def->loc);
    u.last_emit = r.time;
    ++u.stats.records_out;
    if (u.materialize) {
      u.materialize->push_back(std::move(r));
      ++buffered_;
      peak_buffered_ = std::max(peak_buffered_, buffered_);
      return;
    }
    for (std::size_t k = 0; k < u.consumers.size(); ++k) {
      auto [to, qi] = u.consumers[k];
      Node& v = nodes_[to];
      Queue& q = v.queues[qi];
      if (k + 1 == u.consumers.size()) {
        q.items.push_back(std::move(r));
      } else {
        q.items.push_back(r);
      }
      ++v.queued;
      v.stats.peak_queued = std::max(v.stats.peak_queued, v.queued);
      ++queued_total_;
      if (q.back_edge) ++back_deliveries_;
    }
    peak_pending_ = std::max(peak_pending_, queued_total_);
    if (queued_total_ + back_deliveries_ > options_.max_pending)
      throw Error(Errc::pending_overflow,
                  "more than " + std::to_string(options_.max_pending) +
                      " pending records (runaway record recursion?)",
                  u.def->loc);
  }

  void schedule(NodeId id, Timestamp t, TimerPhase phase) {
    Node& u = nodes_[id];
    if (!std::isfinite(t)) throw Error(Errc::math, "timer at a non-finite time", u.def->loc);
    (phase == TimerPhase::pre ? u.pre : u.post).insert(t);
  }

  void diag(NodeId id, Errc code, std::string message) {
    if (diagnostics_.size() >= kMaxStoredDiagnostics) {
      ++diagnostics_dropped_;
      return;
    }
    diagnostics_.push_back(Diagnostic{Severity::warning, code, std::move(message), nodes_[id].def->loc});
  }

  const DataSpan& span() const { return span_; }
  SinkProvider& sinks() { return sinks_; }

 private:
  void check_source_record(const Record& r, Timestamp last) {
    check_record(r);
    if (r.time < last)
      throw Error(Errc::order, "source time decreases from " + format_number(last) + " to " + format_number(r.time) +
                                   " (channel " + r.channel + ")");
  }

  bool matches(Node& u, const std::string& channel) {
    if (u.exact) return channel == u.def->source->pattern;
    auto it = u.matches.find(channel);
    if (it == u.matches.end()) it = u.matches.emplace(channel, std::regex_match(channel, *u.re)).first;
    return it->second;
  }

  void inject(const Record& r) {
    for (NodeId id : source_nodes_) {
      Node& u = nodes_[id];
      if (!matches(u, r.channel)) continue;
      u.queues[static_cast<std::size_t>(u.source_queue)].items.push_back(r);
      ++u.queued;
      u.stats.peak_queued = std::max(u.stats.peak_queued, u.queued);
      ++queued_total_;
    }
    peak_pending_ = std::max(peak_pending_, queued_total_);
  }

  void start(NodeId id) {
    Node& u = nodes_[id];
    try {
      u.op->on_start(*u.ctx);
    } catch (const Error& e) {
      throw at_node(e, *u.def);
    }
  }

  void start_all() {
    for (NodeId id : order_) start(id);
  }

  Timestamp input_watermark(const Node& u, const Queue& q) const {
    if (static_) return kInfinity;
    if (q.producer < 0) return u.reads_source ? w_data_ : w_span_;
    return nodes_[static_cast<std::size_t>(q.producer)].w_out;
  }

  void compute_watermarks() {
    if (static_) return;
    for (Node& u : nodes_) u.w_next = kInfinity;
    const std::size_t passes = cyclic_ ? nodes_.size() + 2 : 1;
    for (std::size_t pass = 0; pass < passes; ++pass) {
      bool changed = false;
      for (NodeId id : order_) {
        Node& u = nodes_[id];
        Timestamp in = kInfinity;
        for (const Queue& q : u.queues) {
          Timestamp w = q.producer < 0 ? (u.reads_source ? w_data_ : w_span_)
                                       : nodes_[static_cast<std::size_t>(q.producer)].w_next;
          if (!q.items.empty()) w = std::min(w, q.items.front().time);
          in = std::min(in, w);
        }
        Timestamp w = in == kInfinity ? kInfinity : in + u.shift;
        if (!u.pre.empty()) w = std::min(w, *u.pre.begin());
        if (!u.post.empty()) w = std::min(w, *u.post.begin());
        w = std::min(w, u.op->pending_bound(span_));
        if (w != u.w_next) {
          u.w_next = w;
          changed = true;
        }
      }
      if (!changed) break;
    }
    for (Node& u : nodes_) {
      if (u.w_next < u.w_out)
        throw Error(Errc::internal, "watermark of " + u.def->op_name + " regressed from " + format_number(u.w_out) +
                                        " to " + format_number(u.w_next), u.def->loc);
      u.w_out = u.w_next;
    }
  }

  // Pre-timers and inputs are safe once no empty queue can still deliver an
  // earlier key; post-timers wait until every input has moved past t.
  bool safe(const Node& u, int cls, Timestamp t, std::size_t qi) const {
    for (std::size_t i = 0; i < u.queues.size(); ++i) {
      const Queue& q = u.queues[i];
      if (!q.items.empty()) continue;
      Timestamp w = input_watermark(u, q);
      if (cls == 0 && w < t) return false;
      if (cls == 1 && (w < t || (w == t && i < qi))) return false;
      if (cls == 2 && w <= t) return false;
    }
    return true;
  }

  bool run_node(NodeId id) {
    Node& u = nodes_[id];
    bool progressed = false;
    while (true) {
      int cls = -1;
      Timestamp t = 0.0;
      std::size_t qi = 0;
      if (!u.pre.empty()) {
        t = *u.pre.begin();
        cls = 0;
      }
      for (std::size_t i = 0; i < u.queues.size(); ++i) {
        const Queue& q = u.queues[i];
        if (q.items.empty()) continue;
        Timestamp h = q.items.front().time;
        if (cls < 0 || h < t || (h == t && cls > 1)) {
          t = h;
          cls = 1;
          qi = i;
        }
      }
      if (!u.post.empty()) {
        Timestamp p = *u.post.begin();
        if (cls < 0 || p < t) {
          t = p;
          cls = 2;
        }
      }
      if (cls < 0) break;
      if (!static_ && !safe(u, cls, t, qi)) break;

      try {
        if (cls == 0) {
          u.pre.erase(u.pre.begin());
          u.op->on_timer(t, *u.ctx);
        } else if (cls == 2) {
          u.post.erase(u.post.begin());
          u.op->on_timer(t, *u.ctx);
        } else {
          Queue& q = u.queues[qi];
          Record r = std::move(q.items.front());
          q.items.pop_front();
          --u.queued;
          if (!static_) --queued_total_;
          ++u.stats.records_in;
          u.op->on_record(q.port, r, *u.ctx);
        }
      } catch (const Error& e) {
        throw at_node(e, *u.def);
      }
      u.stats.peak_retained = std::max(u.stats.peak_retained, u.op->retained());
      progressed = true;
    }
    return progressed;
  }

  void quiesce() {
    while (true) {
      compute_watermarks();
      bool progress = false;
      for (NodeId id : order_) progress |= run_node(id);
      if (!progress) break;
    }
  }

  void observe(const Record& r) {
    if (!options_.on_source_record) return;
    std::vector<std::size_t> retained(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) retained[i] = nodes_[i].op->retained();
    options_.on_source_record(r, retained);
  }

  void finish() {
    for (const Node& u : nodes_)
      if (u.queued != 0 || !u.pre.empty() || !u.post.empty())
        throw Error(Errc::internal, "execution stalled with pending records at " + u.def->op_name, u.def->loc);
    flush_all();
  }

  void flush_all() {
    for (NodeId id : order_) {
      Node& u = nodes_[id];
      try {
        u.op->on_flush(*u.ctx);
      } catch (const Error& e) {
        throw at_node(e, *u.def);
      }
    }
  }

  RunReport report(std::chrono::steady_clock::time_point started) {
    RunReport rep;
    rep.mode = mode_;
    rep.records_read = records_read_;
    for (Node& u : nodes_) {
      u.stats.retained = u.op->retained();
      u.stats.peak_channel = u.op->peak_channel_retained();
      rep.nodes.push_back(u.stats);
    }
    rep.events = events_;
    rep.peak_buffered = peak_buffered_;
    rep.peak_pending = peak_pending_;
    rep.diagnostics = diagnostics_;
    rep.diagnostics_dropped = diagnostics_dropped_;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return rep;
  }

  const FlowGraph& graph_;
  SinkProvider& sinks_;
  RunOptions options_;
  ExecMode mode_;
  std::vector<Node> nodes_;
  std::vector<NodeId> order_;
  std::vector<NodeId> source_nodes_;
  bool cyclic_ = false;
  bool static_ = false;
  DataSpan span_;
  Timestamp w_data_ = kNegInfinity;
  Timestamp w_span_ = kNegInfinity;
  std::size_t queued_total_ = 0;
  std::size_t back_deliveries_ = 0;
  std::size_t peak_pending_ = 0;
  std::size_t buffered_ = 0;
  std::size_t peak_buffered_ = 0;
  std::size_t records_read_ = 0;
  std::vector<LedgerEvent> events_;
  std::vector<Diagnostic> diagnostics_;
  std::size_t diagnostics_dropped_ = 0;
};

void NodeContext::emit(Record r) { engine_->emit(id_, std::move(r)); }
void NodeContext::schedule(Timestamp t, TimerPhase phase) { engine_->schedule(id_, t, phase); }
const DataSpan& NodeContext::span() const { return engine_->span(); }
void NodeContext::diag(Errc code, std::string message) { engine_->diag(id_, code, std::move(message)); }
SinkProvider& NodeContext::sinks() { return engine_->sinks(); }

}  // namespace

std::string LedgerEvent::str() const {
  return std::string(kind == Kind::run ? "run " : "release ") + op + " #" + std::to_string(node);
}

std::string RunReport::str() const {
  std::ostringstream out;
  out << "mode: " << mode_name(mode) << "\n";
  out << "records read: " << records_read << "\n";
  out << "wall time: " << std::fixed << std::setprecision(3) << wall_seconds << " s\n";
  if (mode == ExecMode::static_mode) {
    out << "peak buffered records: " << peak_buffered << "\n";
  } else {
    out << "peak pending records: " << peak_pending << "\n";
  }
  out << "node  operator          in        out       peak-state\n";
  for (const NodeStats& n : nodes) {
    out << std::left << std::setw(6) << ("#" + std::to_string(n.id)) << std::setw(18) << n.op << std::setw(10)
        << n.records_in << std::setw(10) << n.records_out << n.peak_retained << "\n";
  }
  if (!diagnostics.empty()) {
    out << "runtime diagnostics: " << diagnostics.size() + diagnostics_dropped << "\n";
  }
  return out.str();
}

std::string memory_report(const RunReport& report) {
  std::ostringstream out;
  out << "node  operator          peak-state  peak-channel  peak-queued  retained\n";
  for (const NodeStats& n : report.nodes) {
    out << std::left << std::setw(6) << ("#" + std::to_string(n.id)) << std::setw(18) << n.op << std::setw(12)
        << n.peak_retained << std::setw(14) << n.peak_channel << std::setw(13) << n.peak_queued << n.retained << "\n";
  }
  return out.str();
}

RunReport run_streaming(const FlowGraph& graph, RecordSource& source, SinkProvider& sinks, const RunOptions& options) {
  Engine engine(graph, sinks, options, ExecMode::streaming);
  return engine.run_streaming(source);
}

RunReport run_static(const FlowGraph& graph, RecordSource& source, SinkProvider& sinks, const RunOptions& options) {
  Engine engine(graph, sinks, options, ExecMode::static_mode);
  return engine.run_static(source);
}

RunReport run_realtime(const FlowGraph& graph, LiveSource& source, SinkProvider& sinks, Clock& clock,
                       const RunOptions& options, double poll_interval) {
  Engine engine(graph, sinks, options, ExecMode::realtime);
  return engine.run_realtime(source, clock, poll_interval);
}

double SystemClock::now() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

struct LineFeed {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Record> ready;
  bool done = false;
  std::exception_ptr error;
};

LineStreamSource::LineStreamSource(std::istream& in, std::string name) {
  auto feed = std::make_shared<LineFeed>();
  feed_ = feed;
  reader_ = std::thread([feed, &in, name] {
    try {
      EvtReader reader(in, name);
      while (auto r = reader.next()) {
        std::lock_guard<std::mutex> lock(feed->mu);
        feed->ready.push_back(std::move(*r));
        feed->cv.notify_one();
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(feed->mu);
      feed->error = std::current_exception();
    }
    std::lock_guard<std::mutex> lock(feed->mu);
    feed->done = true;
    feed->cv.notify_one();
  });
}

LineStreamSource::~LineStreamSource() {
  bool done;
  {
    std::lock_guard<std::mutex> lock(feed_->mu);
    done = feed_->done;
  }
  if (done) {
    reader_.join();
  } else {
    reader_.detach();  // blocked on a live stream; it owns a share of the feed
  }
}

LiveSource::Poll LineStreamSource::poll(double timeout) {
  std::unique_lock<std::mutex> lock(feed_->mu);
  feed_->cv.wait_for(lock, std::chrono::duration<double>(timeout),
                     [&] { return !feed_->ready.empty() || feed_->done; });
  Poll p;
  if (!feed_->ready.empty()) {
    p.status = Status::record;
    p.record = std::move(feed_->ready.front());
    feed_->ready.pop_front();
    return p;
  }
  if (feed_->error) std::rethrow_exception(feed_->error);
  p.status = feed_->done ? Status::end : Status::idle;
  return p;
}

LiveSource::Poll ScriptedLiveSource::poll(double) {
  Poll p;
  if (pos_ >= steps_.size()) {
    p.status = Status::end;
    return p;
  }
  const Step& s = steps_[pos_++];
  clock_->set(s.clock);
  if (s.record) {
    p.status = Status::record;
    p.record = *s.record;
  }
  return p;
}

}  // namespace honey
