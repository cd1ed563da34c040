#include "honey/record.hpp"

#include <charconv>
#include <cctype>
#include <cmath>

#include "honey/error.hpp"

namespace honey {

bool is_valid_channel_name(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (c == '\n' || c == '\r' || c == ';') return false;
  }
  return true;
}

void check_record(const Record& r) {
  if (!is_valid_channel_name(r.channel))
    throw Error(Errc::parse, "invalid channel name '" + r.channel + "'");
  if (!std::isfinite(r.time)) throw Error(Errc::parse, "non-finite time stamp");
  if (r.value && !std::isfinite(*r.value)) throw Error(Errc::parse, "non-finite value");
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_number(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  // from_chars accepts "inf"/"nan" spellings; only plain decimals are numbers here.
  char c = text.front() == '-' && text.size() > 1 ? text[1] : text.front();
  if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '.')) return std::nullopt;
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace honey
