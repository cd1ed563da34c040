#ifndef HONEY_OPERATORS_HPP
#define HONEY_OPERATORS_HPP

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "honey/error.hpp"
#include "honey/graph.hpp"
#include "honey/io.hpp"
#include "honey/record.hpp"

namespace honey {

enum class ParamType {
  channel,   // pipe input ($var, #regex for the main input)
  number,
  string,
  equation,  // record equation, or a bare number as a constant program
};

struct ParamSpec {
  std::string name;
  ParamType type = ParamType::number;
  bool required = false;
  std::optional<Scalar> fallback;
};

struct OperatorSpec {
  std::string name;
  // Positional order. Any of them may also be given by name.
  std::vector<ParamSpec> params;
  bool keeps_names = false;  // output channels keep the input channel names
  bool source = false;       // no input pipe (tick, calendar)
  bool sink = false;         // produces no output channels
  bool arg_pipes = false;    // accepts arg1:$x arg2:$y ... for record equations
};

const OperatorSpec* find_operator(std::string_view name);
const std::vector<OperatorSpec>& operator_catalog();

// Input ports: 0 is the main input, kTriggerPort the trigger, K >= 1 argK.
constexpr int kMainPort = 0;
constexpr int kTriggerPort = -1;

int port_id(const std::string& name);
std::string port_name(int port);
// Order of simultaneous records on different ports: argK, then the main
// input, then the trigger (a trigger at t sees the data at t).
int port_rank(int port);

enum class TimerPhase {
  pre,   // before inputs with the same time stamp
  post,  // after inputs with the same time stamp
};

// What is known about the time range of the dataset sources.
struct DataSpan {
  std::optional<Timestamp> first;
  // Largest source time stamp read or peeked so far.
  std::optional<Timestamp> known_max;
  // True once the sources are exhausted; known_max is then the last time.
  bool complete = false;
};

class OpContext {
 public:
  virtual ~OpContext() = default;
  virtual void emit(Record r) = 0;
  virtual void schedule(Timestamp t, TimerPhase phase) = 0;
  virtual const DataSpan& span() const = 0;
  // Non-fatal runtime diagnostic (dropped record...).
  virtual void diag(Errc code, std::string message) = 0;
  virtual SinkProvider& sinks() = 0;
};

constexpr Timestamp kInfinity = std::numeric_limits<double>::infinity();

// Per-node runtime. Inputs arrive in merged time order; emitted records must
// never precede the node's advertised watermark.
class Operator {
 public:
  virtual ~Operator() = default;

  virtual void on_start(OpContext&) {}
  virtual void on_record(int port, const Record& r, OpContext& ctx) = 0;
  // Timers are deduplicated by time; a handler processes everything due at t.
  virtual void on_timer(Timestamp, OpContext&) {}
  // End of the run. Sinks write their remaining output here.
  virtual void on_flush(OpContext&) {}

  // Records currently held in operator state.
  virtual std::size_t retained() const { return 0; }
  // Largest number of records ever held for one channel.
  virtual std::size_t peak_channel_retained() const { return 0; }
  // Constant time offset between inputs and outputs (delay +d, echoPast -w).
  virtual double shift() const { return 0.0; }
  // Lower bound on emissions not tied to a timer or an input.
  virtual Timestamp pending_bound(const DataSpan&) const { return kInfinity; }
};

// Builds the runtime for a compiled node. Throws ArgumentError (and friends)
// for invalid argument values, so the compiler calls it once per node.
std::unique_ptr<Operator> make_operator(const OperatorNode& node);

// "<channel>_<op>[p1,p2]", or "<channel>_<op>" without positional literals.
std::string derived_channel_name(const std::string& channel, const OperatorNode& node);

}  // namespace honey

#endif  // HONEY_OPERATORS_HPP
