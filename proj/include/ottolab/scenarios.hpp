#pragma once

#include "ottolab/error.hpp"
#include "ottolab/io.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ottolab {

/// Named initial measure: uniform, bump(center, width), cosine-tilt(amplitude, phase),
/// two-bump(centers, width).
struct MeasureSpec {
    std::string preset = "uniform";
    Coords center{0.5, 0.5};
    double width = 0.05;
    double amplitude = 0.5;
    double phase = 0.0;
    std::array<Coords, 2> centers{Coords{0.25, 0.25}, Coords{0.75, 0.75}};
};

/// Density of a preset on a grid, normalized to unit mass. Bumps are wrapped
/// Gaussians on a 2e-8 floor; the tilt is 1 + a cos(2 pi (x_0 - phase)).
GridDensity build_measure(const MeasureSpec& spec, const Grid& g);
io::json spec_json(const MeasureSpec& spec, int dim);

/// Equal-weight cloud at the histogram quantiles (i + 1/2) / count of a 1D density.
ParticleCloud quantile_cloud(const GridDensity& d, int count);

struct ScenarioConfig {
    std::string scenario;
    int dimension = 1;
    std::uint64_t seed = 1;
    std::optional<int> grid, particles, steps, n, trials;
    std::optional<double> kappa, amplitude, epsilon;
    std::map<std::string, double> tolerances;
    std::optional<MeasureSpec> source, target;
};

/// Malformed or out-of-range configuration. `line` is 0 when unknown.
class ConfigError : public Error {
public:
    ConfigError(std::string field, int line, const std::string& message);
    const std::string& field() const noexcept { return field_; }
    int line() const noexcept { return line_; }

private:
    std::string field_;
    int line_;
};

const std::vector<std::string>& scenario_names();
/// Checks a scenario reports; these are the keys accepted under "tolerances".
const std::vector<std::string>& check_names(const std::string& scenario);

/// Strict JSON: unknown keys, wrong types and out-of-range values raise ConfigError.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

struct Check {
    std::string name;
    std::string operation;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation = "<=";
    bool passed = false;
};

struct RunResult {
    std::vector<Check> checks;
    io::json manifest;
    bool passed() const;
};

/// Runs the scenario and writes manifest.json, checks.json and its data files into
/// out_dir. Library errors propagate.
RunResult run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

struct FieldDiff {
    std::string path;
    std::string a, b;
    double relative = 0.0; // NaN for non-numeric differences
};

struct DiffReport {
    std::string scenario;
    std::vector<FieldDiff> fields;
    std::vector<std::string> identical_files, differing_files;
    std::optional<double> sup_w2; // between exported curves, when both runs have one
    bool empty() const { return fields.empty() && differing_files.empty(); }
    io::json to_json() const;
};

/// a and b are run directories or manifest paths. Numbers differing by at most
/// rel_tol (relative) are treated as equal.
DiffReport compare_runs(const std::filesystem::path& a, const std::filesystem::path& b, double rel_tol = 0.0);

/// 3 for numerical failures, 2 for usage and input errors.
int exit_code(ErrorKind kind);

} // namespace ottolab
