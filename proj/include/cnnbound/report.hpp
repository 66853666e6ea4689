#pragma once

#include <string>
#include <vector>

#include "cnnbound/train.hpp"

namespace cnnbound {

enum class ReportFormat { csv, json };

/// Header of the record CSV.
inline constexpr const char* kRecordCsvHeader = "width,W,seed,train_err,test_err,gap,beta,W_times_beta";

/// Shortest-safe decimal form with 17 significant digits; parses back to the
/// same double.
std::string format_double(double v);

std::string records_to_csv(const std::vector<ExperimentRecord>& records);
std::string records_to_json(const std::vector<ExperimentRecord>& records);

/// Writes records to `path`. Throws ArgumentError on an empty record list and
/// IoError when the file cannot be written.
void emit_report(const std::vector<ExperimentRecord>& records, ReportFormat format, const std::string& path);

/// Reads a record CSV back (traces are not part of the CSV and stay empty).
std::vector<ExperimentRecord> parse_records_csv(const std::string& text);

/// Writes `text` to `path`, throwing IoError on failure.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

} // namespace cnnbound
