#ifndef HONEY_IO_HPP
#define HONEY_IO_HPP

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "honey/record.hpp"

namespace honey {

// Pull-based, time-ordered record stream with one record of lookahead.
class RecordSource {
 public:
  virtual ~RecordSource() = default;
  // Readers throw OrderError on decreasing times unless this is cleared.
  bool check_order = true;

  // Next record without consuming it; nullptr once the stream is exhausted.
  const Record* peek();
  std::optional<Record> next();

 protected:
  virtual std::optional<Record> fetch() = 0;

 private:
  std::optional<Record> lookahead_;
  bool loaded_ = false;
};

// `<channel>;<time>[;<value>]` lines. Blank lines and '#' lines are skipped.
class EvtReader : public RecordSource {
 public:
  EvtReader(std::istream& in, std::string name = "<evt>");
  EvtReader(std::unique_ptr<std::istream> in, std::string name);

 protected:
  std::optional<Record> fetch() override;

 private:
  std::unique_ptr<std::istream> owned_;
  std::istream* in_;
  std::string name_;
  int line_ = 0;
  std::optional<Timestamp> last_time_;
};

// ';'-separated table with a leading `time` column. "NA" cells carry no
// record; empty cells are value-less records.
class CsvReader : public RecordSource {
 public:
  CsvReader(std::istream& in, std::string name = "<csv>");
  CsvReader(std::unique_ptr<std::istream> in, std::string name);

  const std::vector<std::string>& channels();

 protected:
  std::optional<Record> fetch() override;

 private:
  void read_header();

  std::unique_ptr<std::istream> owned_;
  std::istream* in_;
  std::string name_;
  int line_ = 0;
  bool header_read_ = false;
  std::vector<std::string> channels_;
  std::vector<Record> pending_;
  std::size_t pending_pos_ = 0;
  std::optional<Timestamp> last_time_;
};

// Time-ordered k-way merge; simultaneous records keep source order.
class MergedSource : public RecordSource {
 public:
  explicit MergedSource(std::vector<std::unique_ptr<RecordSource>> sources);

 protected:
  std::optional<Record> fetch() override;

 private:
  std::vector<std::unique_ptr<RecordSource>> sources_;
};

class VectorSource : public RecordSource {
 public:
  explicit VectorSource(std::vector<Record> records);

 protected:
  std::optional<Record> fetch() override;

 private:
  std::vector<Record> records_;
  std::size_t pos_ = 0;
};

// Opens .csv files with CsvReader and anything else with EvtReader.
std::unique_ptr<RecordSource> open_dataset(const std::string& path, bool check_order = true);
std::unique_ptr<RecordSource> open_datasets(const std::vector<std::string>& paths, bool check_order = true);

std::vector<Record> read_all(RecordSource& source);
std::vector<Record> read_evt(std::istream& in, const std::string& name = "<evt>");
std::vector<Record> read_csv(std::istream& in, const std::string& name = "<csv>");

std::string format_evt_line(const Record& r);

class EvtWriter {
 public:
  explicit EvtWriter(std::ostream& out) : out_(&out) {}
  void write(const Record& r);

 private:
  std::ostream* out_;
};

void write_evt(std::ostream& out, std::span<const Record> records);

// Where operators and writers send their files.
class SinkProvider {
 public:
  virtual ~SinkProvider() = default;
  virtual std::unique_ptr<std::ostream> open(const std::string& path) = 0;
};

class FileSinkProvider : public SinkProvider {
 public:
  std::unique_ptr<std::ostream> open(const std::string& path) override;
  const std::vector<std::string>& opened() const { return opened_; }
  // Deletes every file opened so far.
  void remove_all();

 private:
  std::vector<std::string> opened_;
};

class MemorySinkProvider : public SinkProvider {
 public:
  std::unique_ptr<std::ostream> open(const std::string& path) override;
  std::map<std::string, std::string> contents() const;
  std::string content(const std::string& path) const;
  bool has(const std::string& path) const { return buffers_.count(path) != 0; }

 private:
  std::map<std::string, std::unique_ptr<std::stringbuf>> buffers_;
};

// Accumulates records into rows keyed by time stamp. Column order is the
// order of first appearance and is kept across clear().
class SyncedCsvBuffer {
 public:
  void add(const Record& r);
  bool empty() const { return rows_.empty(); }
  std::size_t size() const { return records_; }
  void write(std::ostream& out) const;
  void clear();
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  struct Cell {
    bool present = false;
    std::optional<double> value;
  };
  std::vector<std::string> columns_;
  std::map<std::string, std::size_t> column_index_;
  std::vector<std::pair<Timestamp, std::vector<Cell>>> rows_;
  std::size_t records_ = 0;
};

// Replaces `<index>` in a file pattern.
std::string expand_index_pattern(const std::string& pattern, std::size_t index);
bool has_index_placeholder(const std::string& pattern);

// Writes synchronized tables. Without triggers, one file holding every
// record. With triggers, a file per trigger holding the records up to (and
// including) its time, plus a final file for any remainder.
std::vector<std::string> write_csv_synced(std::span<const Record> records,
                                          std::span<const Timestamp> triggers,
                                          const std::string& pattern, SinkProvider& sinks);

}  // namespace honey

#endif  // HONEY_IO_HPP
