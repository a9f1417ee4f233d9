#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "povmopt/optimizer.hpp"
#include "povmopt/tomography.hpp"

namespace povmopt::io {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Complex matrices are nested row arrays of [re, im] pairs. Plain numbers
/// are accepted on input as real entries.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

/// Every document carries "schema_version" and "kind". The *_from_json
/// readers throw InvalidInput on a wrong kind, an unknown schema version,
/// missing fields or values the domain types reject.
Json povm_to_json(const Povm& p);
Povm povm_from_json(const Json& j);

/// A bare matrix array or {"kind": "matrix", "data": ...}.
Json matrix_document(const Matrix& m);
Matrix matrix_document_from_json(const Json& j);

Json probes_to_json(const ProbeEnsemble& probes);
ProbeEnsemble probes_from_json(const Json& j);

Json counts_to_json(const CountsTable& counts);
CountsTable counts_from_json(const Json& j);

Json fidelity_to_json(const FidelityReport& report);
FidelityReport fidelity_from_json(const Json& j);

/// Columns k, F, eps, accepted, fid_overall, elapsed_ms; 17 significant
/// digits; fid_overall is empty when no reference was given.
std::string trace_to_csv(const IterationTrace& trace);
IterationTrace trace_from_csv(std::string_view text);

/// One JSON object per record with the CSV fields plus fid_elements.
std::string trace_to_jsonl(const IterationTrace& trace);
IterationTrace trace_from_jsonl(std::string_view text);

/// Throws InvalidInput when the file cannot be read or is not valid JSON.
Json read_json_file(const std::filesystem::path& path);
/// Writes `text`, creating parent directories. Throws std::runtime_error on
/// I/O failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);
/// Pretty-printed with a trailing newline.
std::string dump(const Json& j);

}  // namespace povmopt::io
