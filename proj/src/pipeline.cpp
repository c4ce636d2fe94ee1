#include "pcrl/pipeline.hpp"
#include "pcrl/voxelization.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace pcrl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value)
{
    const std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError("cannot write '" + path.string() + "'");
    out << text;
}

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

} // namespace

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir)
{
    if (!j.is_object())
        throw ConfigError("config: expected a JSON object");
    RunConfig run;
    run.output = base_dir / run.output;
    run.report = base_dir / run.report;
    nlohmann::json solver = nlohmann::json::object();
    bool have_endpoints = false;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "cloud")
                run.cloud = resolve(base_dir, value.get<std::string>());
            else if (key == "edges")
                run.edges = resolve(base_dir, value.get<std::string>());
            else if (key == "endpoints") {
                run.endpoints = resolve(base_dir, value.get<std::string>());
                have_endpoints = true;
            } else if (key == "output")
                run.output = resolve(base_dir, value.get<std::string>());
            else if (key == "report")
                run.report = resolve(base_dir, value.get<std::string>());
            else if (key == "delay_angle_csv")
                run.delay_angle_csv = resolve(base_dir, value.get<std::string>());
            else if (key == "seed")
                run.seed = value.get<std::uint64_t>();
            else if (key == "noise_stddev")
                run.noise_stddev = value.get<double>();
            else if (key == "normal_estimation_radius")
                run.normal_estimation_radius = value.get<double>();
            else
                solver[key] = value;
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: key '" + key + "' has the wrong type");
        }
    }
    if (!have_endpoints)
        throw ConfigError("config: missing key 'endpoints'");
    if (run.noise_stddev < 0.0)
        throw ConfigError("config: noise_stddev must be non-negative");
    if (run.normal_estimation_radius < 0.0)
        throw ConfigError("config: normal_estimation_radius must be non-negative");
    run.solver = config_from_json(solver);
    return run;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open config '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }
    return run_config_from_json(j, path.parent_path());
}

SceneInput load_scene_input(const RunConfig& run)
{
    SceneInput input;
    if (run.cloud) {
        input.cloud = load_point_cloud(*run.cloud);
        if (run.noise_stddev > 0.0)
            input.cloud = apply_normal_noise(input.cloud, run.noise_stddev, run.seed);
        if (run.normal_estimation_radius > 0.0)
            input.cloud = estimate_normals(input.cloud, run.normal_estimation_radius).cloud;
    }
    if (run.edges)
        input.edges = load_edges(*run.edges);
    input.endpoints = load_endpoints(run.endpoints);
    return input;
}

SimulationResult run_simulation(const SceneInput& input, const SimulationConfig& cfg)
{
    cfg.validate();
    if (input.endpoints.transmitters.empty())
        throw InputError("no transmitters");
    if (input.endpoints.receivers.empty())
        throw InputError("no receivers");

    SimulationResult result;
    RunReport& report = result.report;
    report.config = cfg;

    auto t0 = Clock::now();
    const VoxelizedScene scene =
        build_scene(input.cloud, input.edges, input.endpoints.receivers, cfg, input.endpoints.transmitters);
    report.seconds.voxelization = seconds_since(t0);
    report.points = scene.points.size();
    report.intersectable_entities = scene.ies.size();

    t0 = Clock::now();
    CoarseTraceResult coarse = trace_coarse_paths(scene, input.endpoints.transmitters, cfg);
    report.seconds.coarse = seconds_since(t0);
    report.coarse_paths = coarse.paths.size();
    report.coarse_per_depth = coarse.paths_per_depth;
    report.truncated = coarse.truncated;

    t0 = Clock::now();
    result.refined = refine_paths(coarse.paths, scene, input.endpoints.transmitters, cfg);
    report.seconds.refinement = seconds_since(t0);

    t0 = Clock::now();
    std::vector<RefinedPath> converged;
    const double label_radius = 2.0 * cfg.sample_radius;
    for (const RefinedPath& p : result.refined) {
        ++report.refine_status[to_string(p.status)];
        if (!p.converged())
            continue;
        RefinedPath q = p;
        for (auto& ri : q.interactions)
            if (ri.kind == InteractionKind::Reflection)
                ri.label = resolve_exact_label(ri.position, scene, label_radius, ri.label);
        converged.push_back(std::move(q));
    }
    report.refined_paths = converged.size();
    result.paths = dedupe_refined(std::move(converged), FresnelCheckContext{cfg.wavelength(), cfg.ray_match_angle_deg});
    report.unique_paths = result.paths.size();
    report.unique_per_depth.assign(static_cast<std::size_t>(cfg.max_interactions) + 1, 0);
    for (const auto& p : result.paths)
        ++report.unique_per_depth[p.interactions.size()];
    report.seconds.postprocess = seconds_since(t0);

    result.coarse = std::move(coarse.paths);
    return result;
}

nlohmann::json paths_to_json(const std::vector<RefinedPath>& paths, const Endpoints& endpoints)
{
    nlohmann::json list = nlohmann::json::array();
    for (const RefinedPath& p : paths) {
        nlohmann::json kinds = nlohmann::json::array();
        nlohmann::json labels = nlohmann::json::array();
        for (const auto& ri : p.interactions) {
            kinds.push_back(ri.kind == InteractionKind::Reflection ? "R" : "D");
            labels.push_back(ri.label);
        }
        nlohmann::json points = nlohmann::json::array();
        nlohmann::json dirs = nlohmann::json::array();
        const auto pts = p.points();
        for (std::size_t k = 0; k < pts.size(); ++k) {
            points.push_back(vec_json(pts[k]));
            if (k + 1 < pts.size())
                dirs.push_back(vec_json((pts[k + 1] - pts[k]).normalized()));
        }
        list.push_back({{"tx", endpoints.transmitters[static_cast<std::size_t>(p.tx)].id},
                        {"rx", endpoints.receivers[static_cast<std::size_t>(p.rx)].id},
                        {"kinds", kinds},
                        {"labels", labels},
                        {"points", points},
                        {"directions", dirs},
                        {"length", p.length},
                        {"delay", p.delay}});
    }
    return {{"paths", list}};
}

nlohmann::json report_to_json(const RunReport& r)
{
    return {{"seconds",
             {{"voxelization", r.seconds.voxelization},
              {"coarse_tracing", r.seconds.coarse},
              {"refinement", r.seconds.refinement},
              {"postprocess", r.seconds.postprocess},
              {"total", r.seconds.total()}}},
            {"points", r.points},
            {"intersectable_entities", r.intersectable_entities},
            {"coarse_paths", r.coarse_paths},
            {"refined_paths", r.refined_paths},
            {"unique_paths", r.unique_paths},
            {"truncated", r.truncated},
            {"coarse_per_depth", r.coarse_per_depth},
            {"unique_per_depth", r.unique_per_depth},
            {"refine_status", r.refine_status},
            {"config", config_to_json(r.config)}};
}

std::string report_table(const RunReport& r)
{
    std::ostringstream os;
    os << std::left << std::setw(14) << "Coarse Paths" << std::setw(15) << "Refined Paths" << std::setw(14)
       << "Unique Paths" << std::setw(26) << "Coarse Path Tracing (s)" << "Path Refinement (s)\n";
    os << std::setw(14) << r.coarse_paths << std::setw(15) << r.refined_paths << std::setw(14) << r.unique_paths
       << std::setw(26) << std::fixed << std::setprecision(3) << r.seconds.coarse << r.seconds.refinement << "\n\n";
    os << "Interactions  Coarse  Unique\n";
    const std::size_t depth = std::max(r.coarse_per_depth.size(), r.unique_per_depth.size());
    for (std::size_t d = 0; d < depth; ++d) {
        const std::size_t c = d < r.coarse_per_depth.size() ? r.coarse_per_depth[d] : 0;
        const std::size_t u = d < r.unique_per_depth.size() ? r.unique_per_depth[d] : 0;
        os << std::setw(14) << d << std::setw(8) << c << u << "\n";
    }
    os << "\nVoxelization (s): " << r.seconds.voxelization << "\nPostprocess (s): " << r.seconds.postprocess
       << "\nTotal (s): " << r.seconds.total() << "\n";
    return os.str();
}

std::vector<ArrivalRow> delay_angle_rows(const std::vector<RefinedPath>& paths)
{
    std::vector<ArrivalRow> rows;
    rows.reserve(paths.size());
    for (const RefinedPath& p : paths) {
        const Vec3 last = p.interactions.empty() ? p.tx_position : p.interactions.back().position;
        const Vec3 d = (last - p.rx_position).normalized();
        ArrivalRow row;
        row.azimuth_deg = rad_to_deg(std::atan2(d.y(), d.x()));
        if (row.azimuth_deg >= 180.0)
            row.azimuth_deg -= 360.0;
        row.elevation_deg = rad_to_deg(std::asin(std::clamp(d.z(), -1.0, 1.0)));
        row.delay_ns = p.delay * 1e9;
        row.interactions = p.interactions.size();
        rows.push_back(row);
    }
    return rows;
}

std::string delay_angle_csv(const std::vector<ArrivalRow>& rows)
{
    std::ostringstream os;
    os << "# arrival direction at the receiver; azimuth in [-180,180) deg about +z from +x, elevation in "
          "[-90,90] deg\n";
    os << "azimuth_deg,elevation_deg,delay_ns,interactions\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%zu\n", r.azimuth_deg, r.elevation_deg, r.delay_ns,
                      r.interactions);
        os << buf;
    }
    return os.str();
}

SimulationResult run_batch(const RunConfig& run, bool dump_coarse)
{
    const SceneInput input = load_scene_input(run);
    SimulationResult result = run_simulation(input, run.solver);

    write_text(run.output, paths_to_json(result.paths, input.endpoints).dump(1) + "\n");
    write_text(run.report, report_to_json(result.report).dump(2) + "\n");
    std::filesystem::path table = run.report;
    table.replace_extension(".txt");
    write_text(table, report_table(result.report));
    if (run.delay_angle_csv)
        write_text(*run.delay_angle_csv, delay_angle_csv(delay_angle_rows(result.paths)));
    if (dump_coarse) {
        // Coarse records need the voxelized scene for their IE context; rebuild it, it is cheap.
        const VoxelizedScene scene = build_scene(input.cloud, input.edges, input.endpoints.receivers, run.solver,
                                                 input.endpoints.transmitters);
        std::filesystem::path coarse = run.output;
        coarse.replace_extension(".coarse.json");
        write_text(coarse, coarse_paths_to_json(result.coarse, scene, input.endpoints.transmitters).dump(1) + "\n");
    }
    return result;
}

} // namespace pcrl
