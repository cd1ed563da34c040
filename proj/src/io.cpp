#include "honey/io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "honey/error.hpp"

namespace honey {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

SourceLocation at(const std::string& name, int line) { return SourceLocation{name, line}; }

}  // namespace

const Record* RecordSource::peek() {
  if (!loaded_) {
    lookahead_ = fetch();
    loaded_ = true;
  }
  return lookahead_ ? &*lookahead_ : nullptr;
}

std::optional<Record> RecordSource::next() {
  peek();
  loaded_ = false;
  return std::move(lookahead_);
}

EvtReader::EvtReader(std::istream& in, std::string name) : in_(&in), name_(std::move(name)) {}

EvtReader::EvtReader(std::unique_ptr<std::istream> in, std::string name)
    : owned_(std::move(in)), in_(owned_.get()), name_(std::move(name)) {}

std::optional<Record> EvtReader::fetch() {
  std::string line;
  while (std::getline(*in_, line)) {
    ++line_;
    std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;

    auto fields = split(body, ';');
    if (fields.size() < 2 || fields.size() > 3)
      throw Error(Errc::parse, "expected <channel>;<time>[;<value>], got " +
                                   std::to_string(fields.size()) + " field(s)",
                  at(name_, line_));
    Record r;
    r.channel = std::string(fields[0]);
    if (!is_valid_channel_name(r.channel))
      throw Error(Errc::parse, "empty channel name", at(name_, line_));
    auto t = parse_number(fields[1]);
    if (!t) throw Error(Errc::parse, "malformed time '" + std::string(fields[1]) + "'", at(name_, line_));
    r.time = *t;
    if (fields.size() == 3) {
      auto v = parse_number(fields[2]);
      if (!v)
        throw Error(Errc::parse, "malformed value '" + std::string(fields[2]) + "'", at(name_, line_));
      r.value = *v;
    }
    if (check_order && last_time_ && r.time < *last_time_)
      throw Error(Errc::order,
                  "time " + format_number(r.time) + " is before " + format_number(*last_time_),
                  at(name_, line_));
    last_time_ = r.time;
    return r;
  }
  if (in_->bad()) throw Error(Errc::io, "read failure on " + name_);
  return std::nullopt;
}

CsvReader::CsvReader(std::istream& in, std::string name) : in_(&in), name_(std::move(name)) {}

CsvReader::CsvReader(std::unique_ptr<std::istream> in, std::string name)
    : owned_(std::move(in)), in_(owned_.get()), name_(std::move(name)) {}

const std::vector<std::string>& CsvReader::channels() {
  if (!header_read_) read_header();
  return channels_;
}

void CsvReader::read_header() {
  header_read_ = true;
  std::string line;
  while (std::getline(*in_, line)) {
    ++line_;
    if (trim(line).empty()) continue;
    auto fields = split(trim(line), ';');
    if (fields[0] != "time")
      throw Error(Errc::header, "first column must be 'time'", at(name_, line_));
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (!is_valid_channel_name(fields[i]))
        throw Error(Errc::header, "empty channel name in column " + std::to_string(i + 1),
                    at(name_, line_));
      channels_.emplace_back(fields[i]);
    }
    return;
  }
}

std::optional<Record> CsvReader::fetch() {
  if (!header_read_) read_header();
  while (pending_pos_ >= pending_.size()) {
    pending_.clear();
    pending_pos_ = 0;
    std::string line;
    if (!std::getline(*in_, line)) {
      if (in_->bad()) throw Error(Errc::io, "read failure on " + name_);
      return std::nullopt;
    }
    ++line_;
    if (trim(line).empty()) continue;
    auto fields = split(trim(line), ';');
    if (fields.size() != channels_.size() + 1)
      throw Error(Errc::parse,
                  "expected " + std::to_string(channels_.size() + 1) + " fields, got " +
                      std::to_string(fields.size()),
                  at(name_, line_));
    auto t = parse_number(fields[0]);
    if (!t) throw Error(Errc::parse, "malformed time '" + std::string(fields[0]) + "'", at(name_, line_));
    if (check_order && last_time_ && *t < *last_time_)
      throw Error(Errc::order, "row time " + format_number(*t) + " is before " +
                                   format_number(*last_time_),
                  at(name_, line_));
    last_time_ = *t;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i] == "NA") continue;
      Record r{channels_[i - 1], *t, std::nullopt};
      if (!fields[i].empty()) {
        auto v = parse_number(fields[i]);
        if (!v)
          throw Error(Errc::parse, "malformed value '" + std::string(fields[i]) + "'",
                      at(name_, line_));
        r.value = *v;
      }
      pending_.push_back(std::move(r));
    }
  }
  return std::move(pending_[pending_pos_++]);
}

MergedSource::MergedSource(std::vector<std::unique_ptr<RecordSource>> sources)
    : sources_(std::move(sources)) {}

std::optional<Record> MergedSource::fetch() {
  RecordSource* best = nullptr;
  Timestamp best_time = 0;
  for (auto& s : sources_) {
    const Record* r = s->peek();
    if (r && (!best || r->time < best_time)) {
      best = s.get();
      best_time = r->time;
    }
  }
  if (!best) return std::nullopt;
  return best->next();
}

VectorSource::VectorSource(std::vector<Record> records) : records_(std::move(records)) {}

std::optional<Record> VectorSource::fetch() {
  if (pos_ >= records_.size()) return std::nullopt;
  return records_[pos_++];
}

std::unique_ptr<RecordSource> open_dataset(const std::string& path, bool check_order) {
  auto in = std::make_unique<std::ifstream>(path);
  if (!*in) throw Error(Errc::io, "cannot open input '" + path + "'");
  std::string ext = std::filesystem::path(path).extension().string();
  std::unique_ptr<RecordSource> src;
  if (ext == ".csv") {
    src = std::make_unique<CsvReader>(std::move(in), path);
  } else {
    src = std::make_unique<EvtReader>(std::move(in), path);
  }
  src->check_order = check_order;
  return src;
}

std::unique_ptr<RecordSource> open_datasets(const std::vector<std::string>& paths, bool check_order) {
  std::vector<std::unique_ptr<RecordSource>> sources;
  for (const auto& p : paths) sources.push_back(open_dataset(p, check_order));
  return std::make_unique<MergedSource>(std::move(sources));
}

std::vector<Record> read_all(RecordSource& source) {
  std::vector<Record> out;
  while (auto r = source.next()) out.push_back(std::move(*r));
  return out;
}

std::vector<Record> read_evt(std::istream& in, const std::string& name) {
  EvtReader reader(in, name);
  return read_all(reader);
}

std::vector<Record> read_csv(std::istream& in, const std::string& name) {
  CsvReader reader(in, name);
  return read_all(reader);
}

std::string format_evt_line(const Record& r) {
  std::string line = r.channel;
  line += ';';
  line += format_number(r.time);
  if (r.value) {
    line += ';';
    line += format_number(*r.value);
  }
  return line;
}

void EvtWriter::write(const Record& r) {
  *out_ << format_evt_line(r) << '\n';
  if (!*out_) throw Error(Errc::io, "write failure");
}

void write_evt(std::ostream& out, std::span<const Record> records) {
  EvtWriter w(out);
  for (const Record& r : records) w.write(r);
}

std::unique_ptr<std::ostream> FileSinkProvider::open(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  auto out = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
  if (!*out) throw Error(Errc::io, "cannot open output '" + path + "'");
  if (std::find(opened_.begin(), opened_.end(), path) == opened_.end()) opened_.push_back(path);
  return out;
}

void FileSinkProvider::remove_all() {
  for (const auto& p : opened_) {
    std::error_code ec;
    std::filesystem::remove(p, ec);
  }
  opened_.clear();
}

std::unique_ptr<std::ostream> MemorySinkProvider::open(const std::string& path) {
  auto& buf = buffers_[path];
  if (!buf) buf = std::make_unique<std::stringbuf>(std::ios::out);
  buf->str("");
  return std::make_unique<std::ostream>(buf.get());
}

std::map<std::string, std::string> MemorySinkProvider::contents() const {
  std::map<std::string, std::string> out;
  for (const auto& [path, buf] : buffers_) out[path] = buf->str();
  return out;
}

std::string MemorySinkProvider::content(const std::string& path) const {
  auto it = buffers_.find(path);
  return it == buffers_.end() ? std::string() : it->second->str();
}

void SyncedCsvBuffer::add(const Record& r) {
  auto [it, inserted] = column_index_.try_emplace(r.channel, columns_.size());
  if (inserted) columns_.push_back(r.channel);
  if (rows_.empty() || rows_.back().first != r.time) rows_.emplace_back(r.time, std::vector<Cell>{});
  auto& cells = rows_.back().second;
  if (cells.size() < columns_.size()) cells.resize(columns_.size());
  cells[it->second] = Cell{true, r.value};
  ++records_;
}

void SyncedCsvBuffer::write(std::ostream& out) const {
  out << "time";
  for (const auto& c : columns_) out << ';' << c;
  out << '\n';
  for (const auto& [time, cells] : rows_) {
    out << format_number(time);
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      out << ';';
      if (i >= cells.size() || !cells[i].present) {
        out << "NA";
      } else if (cells[i].value) {
        out << format_number(*cells[i].value);
      }
    }
    out << '\n';
  }
  if (!out) throw Error(Errc::io, "write failure");
}

void SyncedCsvBuffer::clear() {
  rows_.clear();
  records_ = 0;
}

bool has_index_placeholder(const std::string& pattern) {
  return pattern.find("<index>") != std::string::npos;
}

std::string expand_index_pattern(const std::string& pattern, std::size_t index) {
  std::string out = pattern;
  const std::string key = "<index>";
  for (std::size_t pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos)) {
    std::string n = std::to_string(index);
    out.replace(pos, key.size(), n);
    pos += n.size();
  }
  return out;
}

std::vector<std::string> write_csv_synced(std::span<const Record> records,
                                          std::span<const Timestamp> triggers,
                                          const std::string& pattern, SinkProvider& sinks) {
  if (!triggers.empty() && !has_index_placeholder(pattern))
    throw Error(Errc::pattern, "file pattern '" + pattern +
                                   "' lacks <index> but triggers would overwrite it");
  std::vector<std::string> files;
  SyncedCsvBuffer buffer;
  auto flush = [&](std::size_t index) {
    std::string path = triggers.empty() ? pattern : expand_index_pattern(pattern, index);
    auto out = sinks.open(path);
    buffer.write(*out);
    buffer.clear();
    files.push_back(path);
  };

  std::size_t next = 0;
  std::optional<Timestamp> last_trigger;
  for (Timestamp t : triggers) {
    if (last_trigger && *last_trigger == t) continue;
    last_trigger = t;
    while (next < records.size() && records[next].time <= t) buffer.add(records[next++]);
    flush(files.size());
  }
  while (next < records.size()) buffer.add(records[next++]);
  if (triggers.empty() || !buffer.empty()) flush(files.size());
  return files;
}

}  // namespace honey
