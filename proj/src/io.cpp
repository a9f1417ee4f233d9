#include "povmopt/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace povmopt::io {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_header(const Json& j, std::string_view kind) {
  if (!j.is_object()) throw InvalidInput("expected a JSON object for " + std::string(kind));
  const auto version = j.find("schema_version");
  if (version == j.end() || !version->is_number_integer()) {
    throw InvalidInput(std::string(kind) + " document has no integer schema_version");
  }
  if (version->get<int>() != kSchemaVersion) {
    throw InvalidInput("unsupported schema_version " + std::to_string(version->get<int>()));
  }
  const auto k = j.find("kind");
  if (k == j.end() || !k->is_string() || k->get<std::string>() != kind) {
    throw InvalidInput("expected a document of kind \"" + std::string(kind) + "\"");
  }
}

Json header(std::string_view kind) { return Json{{"schema_version", kSchemaVersion}, {"kind", kind}}; }

const Json& field(const Json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end()) throw InvalidInput(std::string("missing field \"") + name + "\"");
  return *it;
}

/// Runs `body`, turning nlohmann type and range errors into InvalidInput.
template <class F>
auto guarded(const char* what, F&& body) {
  try {
    return body();
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("malformed ") + what + ": " + e.what());
  }
}

HermitianOperator hermitian_from_json(const Json& j) { return HermitianOperator(matrix_from_json(j), 1e-9); }

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidInput("not a number: \"" + s + "\"");
  }
  if (used != s.size()) throw InvalidInput("trailing characters in number \"" + s + "\"");
  return v;
}

int parse_int(const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw InvalidInput("not an integer: \"" + s + "\"");
  }
  if (used != s.size()) throw InvalidInput("trailing characters in integer \"" + s + "\"");
  return v;
}

Json record_to_json(const IterationRecord& r) {
  Json j{{"k", r.k},
         {"F", r.objective},
         {"eps", r.epsilon},
         {"accepted", r.accepted},
         {"fid_overall", r.fid_overall ? Json(*r.fid_overall) : Json(nullptr)},
         {"fid_elements", r.fid_elements},
         {"elapsed_ms", r.elapsed_ms}};
  return j;
}

IterationRecord record_from_json(const Json& j) {
  IterationRecord r;
  r.k = field(j, "k").get<int>();
  r.objective = field(j, "F").get<double>();
  r.epsilon = field(j, "eps").get<double>();
  r.accepted = field(j, "accepted").get<bool>();
  const Json& fid = field(j, "fid_overall");
  if (!fid.is_null()) r.fid_overall = fid.get<double>();
  if (const auto it = j.find("fid_elements"); it != j.end()) r.fid_elements = it->get<std::vector<double>>();
  r.elapsed_ms = field(j, "elapsed_ms").get<double>();
  return r;
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(Json::array({m(i, k).real(), m(i, k).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  return guarded("matrix", [&] {
    if (!j.is_array() || j.empty()) throw InvalidInput("matrix must be a non-empty array of rows");
    const auto n = static_cast<Eigen::Index>(j.size());
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Json& row = j[static_cast<std::size_t>(i)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
        throw InvalidInput("matrix must be square");
      }
      for (Eigen::Index k = 0; k < n; ++k) {
        const Json& e = row[static_cast<std::size_t>(k)];
        if (e.is_number()) {
          m(i, k) = Complex(e.get<double>(), 0.0);
        } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
          m(i, k) = Complex(e[0].get<double>(), e[1].get<double>());
        } else {
          throw InvalidInput("matrix entry must be a number or an [re, im] pair");
        }
      }
    }
    if (!m.allFinite()) throw InvalidInput("matrix has non-finite entries");
    return m;
  });
}

Json matrix_document(const Matrix& m) {
  Json j = header("matrix");
  j["dim"] = m.rows();
  j["data"] = matrix_to_json(m);
  return j;
}

Matrix matrix_document_from_json(const Json& j) {
  if (j.is_array()) return matrix_from_json(j);
  check_header(j, "matrix");
  return matrix_from_json(field(j, "data"));
}

Json povm_to_json(const Povm& p) {
  Json j = header("povm");
  j["dim"] = p.dim();
  j["elements"] = Json::array();
  for (const auto& e : p.elements()) j["elements"].push_back(matrix_to_json(e.matrix()));
  return j;
}

Povm povm_from_json(const Json& j) {
  check_header(j, "povm");
  return guarded("povm", [&] {
    const Json& elements = field(j, "elements");
    if (!elements.is_array() || elements.empty()) throw InvalidInput("povm needs a non-empty element list");
    std::vector<HermitianOperator> ops;
    for (const auto& e : elements) ops.push_back(hermitian_from_json(e));
    Povm p(std::move(ops));
    if (field(j, "dim").get<int>() != p.dim()) throw InvalidInput("povm dim field disagrees with its elements");
    return p;
  });
}

Json probes_to_json(const ProbeEnsemble& probes) {
  Json j = header("probes");
  j["dim"] = probes.dim();
  j["labels"] = probes.labels();
  j["states"] = Json::array();
  for (const auto& s : probes.states()) j["states"].push_back(matrix_to_json(s.matrix()));
  return j;
}

ProbeEnsemble probes_from_json(const Json& j) {
  check_header(j, "probes");
  return guarded("probe ensemble", [&] {
    const Json& states = field(j, "states");
    if (!states.is_array()) throw InvalidInput("probe states must be an array");
    std::vector<DensityMatrix> rhos;
    for (const auto& s : states) rhos.emplace_back(hermitian_from_json(s));
    auto labels = field(j, "labels").get<std::vector<std::string>>();
    ProbeEnsemble probes(std::move(rhos), std::move(labels));
    if (field(j, "dim").get<int>() != probes.dim()) throw InvalidInput("probe dim field disagrees with its states");
    return probes;
  });
}

Json counts_to_json(const CountsTable& counts) {
  Json j = header("counts");
  j["shots_per_state"] = counts.shots_per_state();
  j["outcomes"] = counts.outcomes();
  j["probes"] = counts.probes();
  Json rows = Json::array();
  for (int l = 0; l < counts.outcomes(); ++l) {
    Json row = Json::array();
    for (int m = 0; m < counts.probes(); ++m) row.push_back(counts.counts()(l, m));
    rows.push_back(std::move(row));
  }
  j["counts"] = std::move(rows);
  return j;
}

CountsTable counts_from_json(const Json& j) {
  check_header(j, "counts");
  return guarded("counts table", [&] {
    const Json& rows = field(j, "counts");
    if (!rows.is_array() || rows.empty() || !rows[0].is_array() || rows[0].empty()) {
      throw InvalidInput("counts must be a non-empty matrix");
    }
    CountMatrix c(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t l = 0; l < rows.size(); ++l) {
      if (!rows[l].is_array() || rows[l].size() != rows[0].size()) throw InvalidInput("counts rows differ in length");
      for (std::size_t m = 0; m < rows[l].size(); ++m) {
        if (!rows[l][m].is_number_integer()) throw InvalidInput("counts must be integers");
        c(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(m)) = rows[l][m].get<long long>();
      }
    }
    return CountsTable(std::move(c), field(j, "shots_per_state").get<long long>());
  });
}

Json fidelity_to_json(const FidelityReport& report) {
  Json j = header("fidelity");
  j["overall"] = report.overall;
  j["per_element"] = report.per_element;
  j["weights"] = report.weights;
  return j;
}

FidelityReport fidelity_from_json(const Json& j) {
  check_header(j, "fidelity");
  return guarded("fidelity report", [&] {
    FidelityReport r;
    r.overall = field(j, "overall").get<double>();
    r.per_element = field(j, "per_element").get<std::vector<double>>();
    r.weights = field(j, "weights").get<std::vector<double>>();
    if (r.per_element.size() != r.weights.size()) throw InvalidInput("fidelity lists differ in length");
    return r;
  });
}

std::string trace_to_csv(const IterationTrace& trace) {
  std::string out = "k,F,eps,accepted,fid_overall,elapsed_ms\n";
  for (const auto& r : trace.records) {
    out += std::to_string(r.k) + ',' + format_double(r.objective) + ',' + format_double(r.epsilon) + ',' +
           (r.accepted ? "1" : "0") + ',' + (r.fid_overall ? format_double(*r.fid_overall) : std::string()) + ',' +
           format_double(r.elapsed_ms) + '\n';
  }
  return out;
}

IterationTrace trace_from_csv(std::string_view text) {
  IterationTrace trace;
  auto lines = split(text, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines.front() != "k,F,eps,accepted,fid_overall,elapsed_ms") {
    throw InvalidInput("trace CSV has an unexpected header");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != 6) throw InvalidInput("trace CSV line " + std::to_string(i + 1) + " needs 6 cells");
    IterationRecord r;
    r.k = parse_int(cells[0]);
    r.objective = parse_double(cells[1]);
    r.epsilon = parse_double(cells[2]);
    if (cells[3] != "0" && cells[3] != "1") throw InvalidInput("accepted must be 0 or 1");
    r.accepted = cells[3] == "1";
    if (!cells[4].empty()) r.fid_overall = parse_double(cells[4]);
    r.elapsed_ms = parse_double(cells[5]);
    trace.records.push_back(std::move(r));
  }
  return trace;
}

std::string trace_to_jsonl(const IterationTrace& trace) {
  std::string out;
  for (const auto& r : trace.records) {
    Json j = header("trace_record");
    j.update(record_to_json(r));
    out += j.dump() + '\n';
  }
  return out;
}

IterationTrace trace_from_jsonl(std::string_view text) {
  IterationTrace trace;
  for (const auto& line : split(text, '\n')) {
    if (line.empty()) continue;
    const Json j = guarded("trace line", [&] { return Json::parse(line); });
    check_header(j, "trace_record");
    trace.records.push_back(guarded("trace record", [&] { return record_from_json(j); }));
  }
  return trace;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return Json::parse(buf.str());
  } catch (const Json::parse_error& e) {
    throw InvalidInput("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string dump(const Json& j) { return j.dump(2) + '\n'; }

}  // namespace povmopt::io
