#ifndef HONEY_ENGINE_HPP
#define HONEY_ENGINE_HPP

#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "honey/compiler.hpp"
#include "honey/graph.hpp"
#include "honey/io.hpp"

namespace honey {

struct NodeStats {
  NodeId id = 0;
  std::string op;
  std::size_t records_in = 0;
  std::size_t records_out = 0;
  std::size_t retained = 0;       // at the end of the run
  std::size_t peak_retained = 0;  // operator state, all channels
  std::size_t peak_channel = 0;   // operator state, worst channel
  std::size_t peak_queued = 0;    // records waiting in the node's input queues
};

// Static-mode schedule: when a node ran and when its output buffer was freed.
struct LedgerEvent {
  enum class Kind { run, release };
  Kind kind = Kind::run;
  NodeId node = 0;
  std::string op;

  std::string str() const;
  friend bool operator==(const LedgerEvent&, const LedgerEvent&) = default;
};

struct RunReport {
  ExecMode mode = ExecMode::streaming;
  std::size_t records_read = 0;
  std::vector<NodeStats> nodes;
  std::vector<LedgerEvent> events;
  std::size_t peak_buffered = 0;  // static mode: materialized records
  std::size_t peak_pending = 0;   // streaming: queued records
  std::vector<Diagnostic> diagnostics;
  std::size_t diagnostics_dropped = 0;
  double wall_seconds = 0.0;

  std::string str() const;
};

struct RunOptions {
  // Runaway recursion backstop: queued records plus back-edge deliveries
  // since the last source record.
  std::size_t max_pending = 1000000;
  // Streaming and realtime: called once a source record has been fully
  // propagated, with the operator occupancy of every node.
  std::function<void(const Record&, const std::vector<std::size_t>& retained)> on_source_record;
};

RunReport run_streaming(const FlowGraph& graph, RecordSource& source, SinkProvider& sinks,
                        const RunOptions& options = {});
RunReport run_static(const FlowGraph& graph, RecordSource& source, SinkProvider& sinks,
                     const RunOptions& options = {});

class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() = 0;  // Unix epoch seconds
};

class SystemClock : public Clock {
 public:
  double now() override;
};

class FakeClock : public Clock {
 public:
  explicit FakeClock(double start = 0.0) : now_(start) {}
  double now() override { return now_; }
  void set(double t) { now_ = t; }

 private:
  double now_;
};

// Live record feed; poll blocks for at most `timeout` seconds.
class LiveSource {
 public:
  enum class Status { record, idle, end };
  struct Poll {
    Status status = Status::idle;
    Record record;
  };
  virtual ~LiveSource() = default;
  virtual Poll poll(double timeout) = 0;
};

struct LineFeed;

// .evt lines from a stream (standard input for the CLI), read on a thread.
class LineStreamSource : public LiveSource {
 public:
  LineStreamSource(std::istream& in, std::string name = "<stdin>");
  ~LineStreamSource() override;
  Poll poll(double timeout) override;

 private:
  std::shared_ptr<LineFeed> feed_;
  std::thread reader_;
};

// A scripted feed for tests: each item either delivers a record or lets the
// clock advance by `idle` seconds.
class ScriptedLiveSource : public LiveSource {
 public:
  struct Step {
    std::optional<Record> record;
    double clock = 0.0;  // clock value when the step happens
  };
  ScriptedLiveSource(std::vector<Step> steps, FakeClock& clock) : steps_(std::move(steps)), clock_(&clock) {}
  Poll poll(double timeout) override;

 private:
  std::vector<Step> steps_;
  std::size_t pos_ = 0;
  FakeClock* clock_;
};

RunReport run_realtime(const FlowGraph& graph, LiveSource& source, SinkProvider& sinks, Clock& clock,
                       const RunOptions& options = {}, double poll_interval = 0.2);

// Per-node peak occupancy table.
std::string memory_report(const RunReport& report);

}  // namespace honey

#endif  // HONEY_ENGINE_HPP
