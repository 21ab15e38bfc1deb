#pragma once

#include "ottolab/flows.hpp"
#include "ottolab/parallel.hpp"
#include "ottolab/transport.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ottolab::io {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// Shortest decimal that reads back to the same double; "nan", "inf", "-inf" otherwise.
std::string format_double(double v);

/// Writes to a sibling temporary and renames it over the target.
void write_atomic(const fs::path& path, std::string_view content);
std::string read_file(const fs::path& path);

/// Two-space indented JSON with a trailing newline.
std::string dump_json(const json& j);
void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

/// Densities: "# otto-lab density m N" then the values, one grid row per line.
/// Clouds: "# otto-lab cloud m count" then "x[,y],w" per particle.
std::string measure_csv(const Measure& mu);
/// Same layout as a density with the tag "potential".
std::string function_csv(const GridFunction& f, std::string_view tag = "potential");
Measure parse_measure_csv(const std::string& text);

/// "i,j,mass" rows after a header line.
std::string plan_csv(const TransportPlan& plan);
/// {cost, method, epsilon, residuals}
json plan_json(const TransportPlan& plan);
void export_plan(const fs::path& dir, const std::string& stem, const TransportPlan& plan);

/// One CSV per state (stem_0000.csv, ...) plus stem.json holding
/// {n, times, C1_estimate, C2, residuals, states}.
json export_curve(const fs::path& dir, const std::string& stem, const MeasureCurve& c);
/// Reads the states listed by a curve manifest.
std::vector<Measure> load_curve_states(const fs::path& manifest);

/// {subdivision, drifts, scheme, norms, potentials} plus one potential CSV per node.
json export_transport(const fs::path& dir, const std::string& stem, const TransportedField& f);

/// Arbitrary numeric table with a header row.
std::string table_csv(const std::vector<std::string>& columns, const std::vector<std::vector<double>>& rows);

} // namespace ottolab::io
