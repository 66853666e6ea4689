#include "cnnbound/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cnnbound/errors.hpp"

namespace cnnbound {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string records_to_csv(const std::vector<ExperimentRecord>& records) {
    std::string out = kRecordCsvHeader;
    out += '\n';
    for (const auto& r : records) {
        out += std::to_string(r.width) + ',' + std::to_string(r.W) + ',' + std::to_string(r.seed) + ',' +
               format_double(r.train_error) + ',' + format_double(r.test_error) + ',' + format_double(r.gap) + ',' +
               format_double(r.beta) + ',' + format_double(r.w_times_beta()) + '\n';
    }
    return out;
}

std::string records_to_json(const std::vector<ExperimentRecord>& records) {
    // numbers are emitted through format_double so both formats carry the same digits
    std::string out = "[\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        auto list = [](const std::vector<double>& v) {
            std::string s = "[";
            for (std::size_t t = 0; t < v.size(); ++t) s += (t ? ", " : "") + format_double(v[t]);
            return s + "]";
        };
        out += "  {\"width\": " + std::to_string(r.width) + ", \"W\": " + std::to_string(r.W) +
               ", \"seed\": " + std::to_string(r.seed) + ", \"train_err\": " + format_double(r.train_error) +
               ", \"test_err\": " + format_double(r.test_error) + ", \"gap\": " + format_double(r.gap) +
               ", \"beta\": " + format_double(r.beta) + ", \"W_times_beta\": " + format_double(r.w_times_beta()) +
               ", \"train_loss\": " + format_double(r.train_loss) + ", \"test_loss\": " + format_double(r.test_loss) +
               ", \"beta_trace\": " + list(r.beta_trace) + ", \"loss_trace\": " + list(r.loss_trace) + "}";
        out += i + 1 < records.size() ? ",\n" : "\n";
    }
    return out + "]\n";
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path);
    f << text;
    f.close();
    if (!f) throw IoError("failed writing " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void emit_report(const std::vector<ExperimentRecord>& records, ReportFormat format, const std::string& path) {
    if (records.empty()) throw ArgumentError("emit_report: no records");
    write_text_file(path, format == ReportFormat::csv ? records_to_csv(records) : records_to_json(records));
}

std::vector<ExperimentRecord> parse_records_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kRecordCsvHeader) throw FormatError("record CSV: unexpected header");
    std::vector<ExperimentRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        if (f.size() != 8) throw FormatError("record CSV: expected 8 fields in '" + line + "'");
        ExperimentRecord r;
        try {
            r.width = std::stoull(f[0]);
            r.W = std::stoull(f[1]);
            r.seed = std::stoull(f[2]);
            r.train_error = std::stod(f[3]);
            r.test_error = std::stod(f[4]);
            r.gap = std::stod(f[5]);
            r.beta = std::stod(f[6]);
        } catch (const std::exception&) {
            throw FormatError("record CSV: unparsable field in '" + line + "'");
        }
        out.push_back(r);
    }
    return out;
}

} // namespace cnnbound
