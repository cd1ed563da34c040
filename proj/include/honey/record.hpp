#ifndef HONEY_RECORD_HPP
#define HONEY_RECORD_HPP

#include <optional>
#include <string>
#include <string_view>

namespace honey {

// Unit-agnostic time stamp (seconds, indexes, epoch...). Always finite.
using Timestamp = double;

// One observation on a named channel. A record without a value is an event;
// numeric reads of such a record yield 0.
struct Record {
  std::string channel;
  Timestamp time = 0.0;
  std::optional<double> value;

  double numeric() const { return value.value_or(0.0); }

  friend bool operator==(const Record&, const Record&) = default;
};

// Non-empty, and free of line separators and of the .evt field separator.
bool is_valid_channel_name(std::string_view name);

// Throws Errc::parse when the record breaks the Record invariants.
void check_record(const Record& r);

// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

// Strict full-token parse; rejects trailing garbage and non-finite values.
std::optional<double> parse_number(std::string_view text);

}  // namespace honey

#endif  // HONEY_RECORD_HPP
