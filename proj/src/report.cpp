#include <cmath>
#include <cstdio>

#include "xnf/error.hpp"
#include "xnf/evalkit.hpp"
#include "xnf/text.hpp"

namespace xnf {

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string cell(double v, ReportTable::Kind kind, ReportFormat format) {
  if (kind == ReportTable::Kind::Count) return std::to_string(static_cast<long long>(std::llround(v)));
  return format == ReportFormat::Csv ? fixed(v, 4) : fixed(100.0 * v, 1);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_fields(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::string emit_report(const ReportTable& t, ReportFormat format) {
  std::string out;
  if (format == ReportFormat::Csv) {
    out += csv_escape(t.row_header);
    for (const auto& c : t.columns) out += "," + csv_escape(c);
    out += '\n';
    for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
      out += csv_escape(t.row_labels[r]);
      for (std::size_t c = 0; c < t.columns.size(); ++c) out += "," + cell(t.values[r][c], t.kinds[c], format);
      out += '\n';
    }
    return out;
  }
  if (!t.title.empty()) out += "### " + t.title + "\n\n";
  out += "| " + t.row_header + " |";
  for (const auto& c : t.columns) out += " " + c + " |";
  out += "\n|---|";
  for (std::size_t c = 0; c < t.columns.size(); ++c) out += "---:|";
  out += '\n';
  for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
    out += "| " + t.row_labels[r] + " |";
    for (std::size_t c = 0; c < t.columns.size(); ++c) out += " " + cell(t.values[r][c], t.kinds[c], format) + " |";
    out += '\n';
  }
  if (!t.notes.empty()) {
    out += '\n';
    for (const auto& n : t.notes) out += "_" + n + "_\n";
  }
  return out;
}

std::string emit_report(const std::vector<ReportTable>& tables, ReportFormat format) {
  std::string out;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (i) out += '\n';
    out += emit_report(tables[i], format);
  }
  return out;
}

ReportTable parse_report_csv(std::string_view body) {
  auto lines = text::split_lines(body);
  if (lines.empty() || lines.front().empty()) throw Error(ErrorKind::EmptyInput, "no CSV header");
  ReportTable t;
  auto header = csv_fields(lines.front());
  t.row_header = header.front();
  t.columns.assign(header.begin() + 1, header.end());
  t.kinds.assign(t.columns.size(), ReportTable::Kind::Metric);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto fields = csv_fields(lines[i]);
    if (fields.size() != header.size()) throw ParseError(ErrorKind::MalformedLine, i + 1, "wrong field count");
    t.row_labels.push_back(fields.front());
    std::vector<double> row;
    for (std::size_t c = 1; c < fields.size(); ++c) {
      try {
        row.push_back(std::stod(fields[c]));
      } catch (const std::exception&) {
        throw ParseError(ErrorKind::MalformedLine, i + 1, "bad number '" + fields[c] + "'");
      }
    }
    t.values.push_back(std::move(row));
  }
  return t;
}

std::vector<ReportTable> report_tables(const DomainMixResult& r) {
  ReportTable f1;
  f1.title = "F1 by parallel-data domain";
  f1.row_header = "training data";
  f1.columns = r.columns;
  f1.kinds.assign(r.columns.size(), ReportTable::Kind::Metric);
  f1.row_labels = r.rows;
  f1.values = r.f1;

  ReportTable by_type;
  by_type.title = "F1 by entity type on " + r.breakdown_testset;
  by_type.row_header = "training data";
  by_type.columns = r.types;
  by_type.kinds.assign(r.types.size(), ReportTable::Kind::Metric);
  by_type.row_labels = r.rows;
  by_type.values = r.type_f1;

  ReportTable counts;
  counts.title = "Entity count by type in the pseudo-labeled data";
  counts.row_header = "domain";
  counts.columns = r.types;
  counts.columns.push_back("All");
  counts.kinds.assign(counts.columns.size(), ReportTable::Kind::Count);
  counts.row_labels = r.count_rows;
  for (const auto& row : r.counts) counts.values.emplace_back(row.begin(), row.end());
  return {f1, by_type, counts};
}

std::vector<ReportTable> report_tables(const SizeSweepResult& r) {
  ReportTable t;
  t.title = "F1 by pseudo-labeled training size";
  t.row_header = "size";
  t.columns = {"mean_f1", "stddev"};
  t.kinds = {ReportTable::Kind::Metric, ReportTable::Kind::Metric};
  for (const auto& p : r.points) {
    t.row_labels.push_back(std::to_string(p.size));
    t.values.push_back({p.mean_f1, p.stddev});
  }
  t.notes.push_back("plateau size (first within 1 F1 point of the best): " + std::to_string(r.plateau_size));
  return {t};
}

std::vector<ReportTable> report_tables(const AblationResult& r) {
  ReportTable t;
  t.title = "Ablation";
  t.row_header = "setting";
  t.columns = {"precision", "recall", "f1"};
  t.kinds.assign(3, ReportTable::Kind::Metric);
  for (const auto& row : r.rows) {
    t.row_labels.push_back(row.manifest.name);
    t.values.push_back({row.precision, row.recall, row.f1});
  }
  t.notes.push_back(
      "Reference F1 for the same six settings with mBERT on German: 74.6, 72.1, 72.7, 72.3, 74.5, 51.6 "
      "(display only; not reproducible with this tagger)");
  return {t};
}

ReportTable report_table(const EvalReport& r) {
  ReportTable t;
  t.title = "Evaluation";
  t.row_header = "type";
  t.columns = {"precision", "recall", "f1", "support", "predicted", "true_positives"};
  using K = ReportTable::Kind;
  t.kinds = {K::Metric, K::Metric, K::Metric, K::Count, K::Count, K::Count};
  auto add = [&t](const std::string& label, const Metrics& m) {
    t.row_labels.push_back(label);
    t.values.push_back({m.precision, m.recall, m.f1, static_cast<double>(m.gold), static_cast<double>(m.predicted),
                        static_cast<double>(m.true_positives)});
  };
  for (const auto& [type, m] : r.per_type) add(type, m);
  add("micro", r.micro);
  return t;
}

}  // namespace xnf
