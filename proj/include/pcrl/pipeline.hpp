#pragma once

#include "pcrl/coarse_tracer.hpp"
#include "pcrl/path_refinement.hpp"
#include "pcrl/postprocess.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace pcrl {

/// Batch run description. File paths are resolved against the config file's directory.
struct RunConfig {
    std::optional<std::filesystem::path> cloud; ///< PLY; absent for an empty scene
    std::optional<std::filesystem::path> edges;
    std::filesystem::path endpoints;
    std::filesystem::path output = "paths.json";
    std::filesystem::path report = "report.json";
    std::optional<std::filesystem::path> delay_angle_csv;
    std::uint64_t seed = 0;
    double noise_stddev = 0.0; ///< displacement along the normals (m)
    double normal_estimation_radius = 0.0; ///< re-estimate normals when positive (m)
    SimulationConfig solver;
};

/// Splits the run keys off and hands the remaining keys to config_from_json. Throws ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

struct SceneInput {
    PointCloud cloud;
    std::vector<DiffractionEdge> edges;
    Endpoints endpoints;
};

/// Loads the referenced files and applies the optional noise / normal re-estimation.
SceneInput load_scene_input(const RunConfig& run);

struct PhaseTimes {
    double voxelization = 0.0;
    double coarse = 0.0;
    double refinement = 0.0;
    double postprocess = 0.0;
    double total() const { return voxelization + coarse + refinement + postprocess; }
};

struct RunReport {
    PhaseTimes seconds;
    std::size_t points = 0;
    std::size_t intersectable_entities = 0;
    std::size_t coarse_paths = 0;
    std::size_t refined_paths = 0; ///< converged and visible
    std::size_t unique_paths = 0;
    std::size_t truncated = 0;
    std::vector<std::size_t> coarse_per_depth; ///< index: interaction count
    std::vector<std::size_t> unique_per_depth;
    std::map<std::string, std::size_t> refine_status;
    SimulationConfig config;
};

struct SimulationResult {
    std::vector<CoarsePath> coarse;
    std::vector<RefinedPath> refined; ///< every refinement outcome, in coarse order
    std::vector<RefinedPath> paths; ///< unique paths sorted by delay
    RunReport report;
};

/// Voxelize -> coarse trace -> refine -> exact labels -> Fresnel dedupe.
SimulationResult run_simulation(const SceneInput& input, const SimulationConfig& cfg);

/// Deterministic path listing: tx/rx ids, kinds, labels, points, segment directions, length, delay.
nlohmann::json paths_to_json(const std::vector<RefinedPath>& paths, const Endpoints& endpoints);

nlohmann::json report_to_json(const RunReport& report);
/// Human-readable summary in the layout of a paths / timings table.
std::string report_table(const RunReport& report);

struct ArrivalRow {
    double azimuth_deg = 0.0; ///< [-180, 180) about +z from +x
    double elevation_deg = 0.0; ///< [-90, 90]
    double delay_ns = 0.0;
    std::size_t interactions = 0;
};

/// Arrival direction at the receiver: from the receiver towards the last point before it.
std::vector<ArrivalRow> delay_angle_rows(const std::vector<RefinedPath>& paths);
std::string delay_angle_csv(const std::vector<ArrivalRow>& rows);

/// Runs the whole batch described by `run` and writes every artifact. Returns the result.
SimulationResult run_batch(const RunConfig& run, bool dump_coarse);

} // namespace pcrl
