#include "smartaug/metrics.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "smartaug/error.hpp"

namespace smartaug {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t line_no, const char* column) {
  if (s.empty()) {
    throw FormatError("metrics CSV line " + std::to_string(line_no) + ": empty " + column);
  }
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw FormatError("metrics CSV line " + std::to_string(line_no) + ": bad " + column + " '" +
                      s + "'");
  }
  return v;
}

}  // namespace

std::string metrics_to_csv(const std::vector<MetricsRecord>& records,
                           std::optional<double> test_accuracy) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const MetricsRecord& r : records) {
    out += std::to_string(r.epoch) + "," + fmt(r.train_loss_total) + "," +
           (r.train_loss_a ? fmt(*r.train_loss_a) : std::string()) + "," + fmt(r.train_loss_b) +
           "," + fmt(r.val_loss_b) + "," + fmt(r.val_accuracy) + "\n";
  }
  if (test_accuracy) out += "test_accuracy," + fmt(*test_accuracy) + "\n";
  return out;
}

MetricsTable parse_metrics_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  MetricsTable table;
  bool header_seen = false;
  bool finished = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kMetricsHeader) {
        throw FormatError("metrics CSV line " + std::to_string(line_no) + ": expected header '" +
                          kMetricsHeader + "'");
      }
      header_seen = true;
      continue;
    }
    if (finished) {
      throw FormatError("metrics CSV line " + std::to_string(line_no) +
                        ": content after test_accuracy line");
    }
    const auto fields = split_fields(line);
    if (!fields.empty() && fields[0] == "test_accuracy") {
      if (fields.size() != 2) {
        throw FormatError("metrics CSV line " + std::to_string(line_no) +
                          ": test_accuracy line needs exactly one value");
      }
      table.test_accuracy = parse_number(fields[1], line_no, "test_accuracy");
      finished = true;
      continue;
    }
    if (fields.size() != 6) {
      throw FormatError("metrics CSV line " + std::to_string(line_no) + ": expected 6 fields, got " +
                        std::to_string(fields.size()));
    }
    MetricsRecord r;
    const double epoch = parse_number(fields[0], line_no, "epoch");
    if (epoch < 0 || epoch != static_cast<double>(static_cast<std::size_t>(epoch))) {
      throw FormatError("metrics CSV line " + std::to_string(line_no) + ": epoch must be a non-negative integer");
    }
    r.epoch = static_cast<std::size_t>(epoch);
    r.train_loss_total = parse_number(fields[1], line_no, "train_loss_total");
    if (!fields[2].empty()) r.train_loss_a = parse_number(fields[2], line_no, "train_loss_a");
    r.train_loss_b = parse_number(fields[3], line_no, "train_loss_b");
    r.val_loss_b = parse_number(fields[4], line_no, "val_loss_b");
    r.val_accuracy = parse_number(fields[5], line_no, "val_accuracy");
    table.records.push_back(r);
  }
  if (!header_seen) throw FormatError("metrics CSV line 1: missing header");
  return table;
}

}  // namespace smartaug
