#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phishintent::csv {

using Row = std::vector<std::string>;

class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t record, const std::string& what)
      : std::runtime_error(what), record_(record) {}
  /// 1-based record index, counting the header as record 1.
  std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

/// RFC 4180 style: comma delimiter, double-quote quoting with "" escapes,
/// quoted fields may span lines, LF or CRLF record terminators.
std::vector<Row> parse(std::string_view text);

std::string escape_field(std::string_view field);
void write_row(std::ostream& out, const Row& row);

}  // namespace phishintent::csv
