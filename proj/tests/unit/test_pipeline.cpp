#include "fixtures.hpp"

#include "pcrl/pipeline.hpp"

#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <sys/wait.h>

using namespace pcrl;

namespace {

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j)
{
    std::ofstream(p) << j.dump(2);
}

int run_cli(const std::string& args, const std::filesystem::path& log)
{
    const std::string cmd = std::string(PCRL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json endpoints_json(const Vec3& tx, const Vec3& rx)
{
    return {{"transmitters", {{{"id", 0}, {"position", {tx.x(), tx.y(), tx.z()}}}}},
            {"receivers", {{{"id", 0}, {"position", {rx.x(), rx.y(), rx.z()}}}}}};
}

RefinedPath straight(const Vec3& tx, const Vec3& rx)
{
    RefinedPath p;
    p.tx_position = tx;
    p.rx_position = rx;
    p.length = (rx - tx).norm();
    p.delay = p.length / kSpeedOfLight;
    p.status = RefineStatus::Converged;
    return p;
}

} // namespace

TEST_SUITE("pipeline")
{
    TEST_CASE("empty scene through the command line gives line of sight only")
    {
        const auto dir = fixtures::temp_dir("los");
        write_json(dir / "endpoints.json", endpoints_json(Vec3(0, 0, 1), Vec3(3, 0, 1)));
        write_json(dir / "config.json", {{"endpoints", "endpoints.json"}, {"delay_angle_csv", "arrivals.csv"}});
        REQUIRE(run_cli("run " + (dir / "config.json").string(), dir / "log.txt") == 0);
        const nlohmann::json out = nlohmann::json::parse(slurp(dir / "paths.json"));
        REQUIRE(out["paths"].size() == 1);
        const auto& p = out["paths"][0];
        CHECK(p["kinds"].empty());
        CHECK(p["length"].get<double>() == doctest::Approx(3.0));
        CHECK(p["delay"].get<double>() == doctest::Approx(3.0 / kSpeedOfLight));
        const nlohmann::json report = nlohmann::json::parse(slurp(dir / "report.json"));
        CHECK(report["unique_paths"] == 1);
        CHECK(std::filesystem::exists(dir / "report.txt"));
        CHECK(slurp(dir / "arrivals.csv").find("azimuth_deg") != std::string::npos);
    }

    TEST_CASE("command line errors exit non-zero with a diagnostic")
    {
        const auto dir = fixtures::temp_dir("cli_errors");
        CHECK(run_cli("run " + (dir / "missing.json").string(), dir / "log1.txt") != 0);
        CHECK(slurp(dir / "log1.txt").find("pcrl:") != std::string::npos);

        write_json(dir / "bad.json", {{"endpoints", "e.json"}, {"kappa", 0}});
        CHECK(run_cli("run " + (dir / "bad.json").string(), dir / "log2.txt") != 0);
        CHECK(slurp(dir / "log2.txt").find("config error") != std::string::npos);

        write_json(dir / "unknown.json", {{"endpoints", "e.json"}, {"no_such_key", 1}});
        CHECK(run_cli("run " + (dir / "unknown.json").string(), dir / "log3.txt") != 0);

        write_json(dir / "noeps.json", {{"endpoints", "absent.json"}});
        CHECK(run_cli("run " + (dir / "noeps.json").string(), dir / "log4.txt") != 0);
        CHECK(slurp(dir / "log4.txt").find("input error") != std::string::npos);
    }

    TEST_CASE("run config keys")
    {
        const RunConfig run = run_config_from_json(
            {{"endpoints", "e.json"}, {"cloud", "c.ply"}, {"seed", 7}, {"kappa", 5}, {"voxel_size", 0.25}}, "/data");
        CHECK(run.endpoints == std::filesystem::path("/data/e.json"));
        CHECK(run.cloud == std::filesystem::path("/data/c.ply"));
        CHECK(run.output == std::filesystem::path("/data/paths.json"));
        CHECK(run.seed == 7);
        CHECK(run.solver.kappa == 5);
        CHECK(run.solver.voxel_size == 0.25);
        CHECK_THROWS_AS(run_config_from_json({{"cloud", "c.ply"}}, "/data"), ConfigError);
        CHECK_THROWS_AS(run_config_from_json({{"endpoints", 3}}, "/data"), ConfigError);
    }

    TEST_CASE("box room at second order matches the image method")
    {
        const oracle::OVec tx{1.1, 1.3, 1.2};
        const oracle::OVec rx{2.7, 1.9, 1.5};
        const oracle::AnalyticScene room = oracle::make_box_room({4, 3, 2.5}, tx, rx);
        const auto truth = oracle::image_method_paths(room, 2);
        SceneInput input;
        input.cloud = oracle::sample_scene_to_cloud(room, 1e4, 1);
        input.endpoints.transmitters = {fixtures::tx_at(fixtures::ev(tx))};
        input.endpoints.receivers = {fixtures::rx_at(fixtures::ev(rx))};
        SimulationConfig cfg;
        cfg.max_interactions = 2;
        const SimulationResult res = run_simulation(input, cfg);
        CHECK(res.paths.size() == truth.size());
        std::set<std::vector<std::uint32_t>> want, got;
        for (const auto& t : truth) {
            std::vector<std::uint32_t> labels;
            for (const int k : t.planes)
                labels.push_back(room.planes[static_cast<std::size_t>(k)].label);
            want.insert(labels);
        }
        for (const auto& p : res.paths) {
            std::vector<std::uint32_t> labels;
            for (const auto& r : p.interactions)
                labels.push_back(r.label);
            got.insert(labels);
            CHECK(p.converged());
        }
        CHECK(got == want);
        for (std::size_t i = 1; i < res.paths.size(); ++i)
            CHECK(res.paths[i - 1].delay <= res.paths[i].delay);

        const RunReport& rep = res.report;
        CHECK(rep.unique_paths == res.paths.size());
        CHECK(rep.coarse_paths == res.coarse.size());
        CHECK(rep.coarse_paths >= rep.refined_paths);
        CHECK(rep.refined_paths >= rep.unique_paths);
        REQUIRE(rep.unique_per_depth.size() >= 3);
        CHECK(rep.unique_per_depth[0] == 1);
        CHECK(rep.unique_per_depth[1] == 6);
        const nlohmann::json rj = report_to_json(rep);
        for (const char* key : {"coarse_paths", "refined_paths", "unique_paths", "seconds", "config"})
            CHECK(rj.contains(key));
        const std::string table = report_table(rep);
        for (const char* col : {"Coarse Paths", "Refined Paths", "Unique Paths", "Coarse Path Tracing (s)",
                                "Path Refinement (s)"})
            CHECK(table.find(col) != std::string::npos);

        const nlohmann::json pj = paths_to_json(res.paths, input.endpoints);
        REQUIRE(pj["paths"].size() == res.paths.size());
        for (const auto& p : pj["paths"]) {
            CHECK(p["points"].size() == p["kinds"].size() + 2);
            CHECK(p["directions"].size() == p["kinds"].size() + 1);
            CHECK(p["labels"].size() == p["kinds"].size());
        }
    }

    TEST_CASE("arrival table")
    {
        const auto rows = delay_angle_rows({straight(Vec3(3, 0, 0), Vec3(0, 0, 0)), straight(Vec3(0, -2, 2), Vec3::Zero())});
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].azimuth_deg == doctest::Approx(0.0));
        CHECK(rows[0].elevation_deg == doctest::Approx(0.0));
        CHECK(rows[0].delay_ns == doctest::Approx(10.007).epsilon(1e-4));
        CHECK(rows[0].interactions == 0);
        CHECK(rows[1].azimuth_deg == doctest::Approx(-90.0));
        CHECK(rows[1].elevation_deg == doctest::Approx(45.0));
        const auto back = delay_angle_rows({straight(Vec3(-1, 0, 0), Vec3::Zero())});
        CHECK(back[0].azimuth_deg == doctest::Approx(-180.0));
        const std::string csv = delay_angle_csv(rows);
        CHECK(csv.find("azimuth_deg,elevation_deg,delay_ns,interactions") != std::string::npos);
    }

    TEST_CASE("single edge diffraction end to end matches the stationary point")
    {
        const DiffractionEdge edge =
            fixtures::right_angle_edge(0, Vec3(1, 1, 0), Vec3(1, 1, 2), Vec3::UnitX(), Vec3::UnitY());
        const Vec3 tx(2.0, 1.0, 0.5), rx(1.0, 2.0, 1.5);
        SceneInput input;
        input.edges = {edge};
        input.endpoints.transmitters = {fixtures::tx_at(tx)};
        input.endpoints.receivers = {fixtures::rx_at(rx)};
        SimulationConfig cfg;
        cfg.max_interactions = 1;
        cfg.max_diffractions = 1;
        const SimulationResult res = run_simulation(input, cfg);
        const auto truth = oracle::edge_stationary_point(
            oracle::Edge{fixtures::ov(edge.start), fixtures::ov(edge.end), 0}, fixtures::ov(tx), fixtures::ov(rx));
        REQUIRE(truth);
        int diffracted = 0;
        for (const auto& p : res.paths) {
            if (p.interactions.empty())
                continue;
            ++diffracted;
            REQUIRE(p.interactions.size() == 1);
            CHECK(p.interactions[0].kind == InteractionKind::Diffraction);
            CHECK(std::abs(p.interactions[0].t - truth->t) < 1e-4);
            CHECK(p.length == doctest::Approx(truth->length).epsilon(1e-8));
        }
        CHECK(diffracted == 1);
        CHECK(res.paths.size() == 2);
        const nlohmann::json pj = paths_to_json(res.paths, input.endpoints);
        CHECK(pj["paths"][1]["kinds"][0] == "D");
    }
}
