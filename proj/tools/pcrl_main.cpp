// Command-line driver: `pcrl run <config>` and `pcrl make-box-room <dir>`.

#include "pcrl/parallel.hpp"
#include "pcrl/pipeline.hpp"
#include "pcrl/reference_oracle.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

int run_command(const std::string& config_path, unsigned threads, std::optional<std::uint64_t> seed,
                bool dump_coarse, const std::string& report, const std::string& output, const std::string& csv)
{
    pcrl::RunConfig run = pcrl::load_run_config(config_path);
    if (seed)
        run.seed = *seed;
    if (!report.empty())
        run.report = report;
    if (!output.empty())
        run.output = output;
    if (!csv.empty())
        run.delay_angle_csv = csv;
    pcrl::set_thread_count(threads);
    const pcrl::SimulationResult result = pcrl::run_batch(run, dump_coarse);
    std::cout << pcrl::report_table(result.report);
    return 0;
}

int make_box_room(const std::filesystem::path& dir, double density, std::uint64_t seed, int max_interactions)
{
    using pcrl::oracle::OVec;
    const OVec size{4.0, 3.0, 2.5};
    const OVec tx{1.1, 1.3, 1.2};
    const OVec rx{2.7, 1.9, 1.5};
    const auto scene = pcrl::oracle::make_box_room(size, tx, rx);
    std::filesystem::create_directories(dir);
    pcrl::save_point_cloud(pcrl::oracle::sample_scene_to_cloud(scene, density, seed), dir / "cloud.ply");

    pcrl::Endpoints eps;
    eps.transmitters.push_back({pcrl::Vec3(tx[0], tx[1], tx[2]), pcrl::EndpointKind::Transmitter, 0});
    eps.receivers.push_back({pcrl::Vec3(rx[0], rx[1], rx[2]), pcrl::EndpointKind::Receiver, 0});
    pcrl::save_endpoints(eps, dir / "endpoints.json");

    const nlohmann::json config = {{"cloud", "cloud.ply"},        {"endpoints", "endpoints.json"},
                                   {"output", "paths.json"},      {"report", "report.json"},
                                   {"delay_angle_csv", "arrivals.csv"}, {"seed", seed},
                                   {"max_interactions", max_interactions}, {"max_diffractions", 0}};
    std::ofstream(dir / "config.json") << config.dump(2) << "\n";
    std::cout << "wrote " << (dir / "config.json").string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Point-cloud ray-launching multipath solver"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Trace, refine and deduplicate paths for a config");
    std::string config_path;
    unsigned threads = 0;
    std::optional<std::uint64_t> seed;
    bool dump_coarse = false;
    std::string report;
    std::string output;
    std::string csv;
    run->add_option("config", config_path, "Run config (JSON)")->required();
    run->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");
    run->add_option("--seed", seed, "Override the config seed");
    run->add_flag("--dump-coarse", dump_coarse, "Also write the coarse paths next to the output");
    run->add_option("--report", report, "Report path (JSON; a .txt table is written alongside)");
    run->add_option("--output", output, "Paths file");
    run->add_option("--delay-angle-csv", csv, "Arrival delay / angle table");

    auto* box = app.add_subcommand("make-box-room", "Write a sampled 4 x 3 x 2.5 m box room scene");
    std::string box_dir;
    double density = 1e4;
    std::uint64_t box_seed = 1;
    int box_order = 3;
    box->add_option("dir", box_dir, "Output directory")->required();
    box->add_option("--density", density, "Points per square metre");
    box->add_option("--seed", box_seed, "Sampling seed");
    box->add_option("--max-interactions", box_order, "max_interactions written to the config");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return run_command(config_path, threads, seed, dump_coarse, report, output, csv);
        return make_box_room(box_dir, density, box_seed, box_order);
    } catch (const pcrl::ConfigError& e) {
        std::cerr << "pcrl: config error: " << e.what() << "\n";
    } catch (const pcrl::InputError& e) {
        std::cerr << "pcrl: input error: " << e.what() << "\n";
    } catch (const pcrl::CapacityError& e) {
        std::cerr << "pcrl: capacity error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "pcrl: error: " << e.what() << "\n";
    }
    return 1;
}
