#include "pcrl/config.hpp"

#include <functional>
#include <map>

namespace pcrl {

namespace {

void require(bool condition, const std::string& message)
{
    if (!condition)
        throw ConfigError("config: " + message);
}

} // namespace

void SimulationConfig::validate() const
{
    require(carrier_frequency > 0.0, "carrier frequency must be positive");
    require(voxel_size > 0.0, "voxel_size must be positive");
    require(voxel_division >= 1, "d_v must be a positive integer");
    require(subvoxel_division >= 1, "d_sv must be a positive integer");
    require(scaling_factor > 0.0, "xi must be positive");
    require(sample_radius > 0.0 && refine_sample_radius > 0.0, "r_s must be positive");
    require(sdf_threshold > 0.0 && refine_sdf_threshold > 0.0, "t_sdf must be positive");
    require(kappa >= 1, "kappa must be a positive integer");
    require(refinement_iterations >= 1, "rho must be a positive integer");
    require(convergence_threshold > 0.0, "delta must be positive");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    require(beta > 0.0 && beta < 1.0, "beta must lie in (0, 1)");
    require(distance_threshold >= 0.0, "t_d must be non-negative");
    require(angle_threshold_deg >= 0.0, "t_a must be non-negative");
    require(max_interactions >= 0 && max_interactions <= 16, "max_interactions must lie in [0, 16]");
    require(max_diffractions >= 0 && max_diffractions <= max_interactions,
            "max_diffractions must lie in [0, max_interactions]");
    require(diffraction_step_deg > 0.0, "diffraction_step must be positive");
    require(ray_match_angle_deg > 0.0, "ray_match_angle must be positive");
    require(max_in_flight >= 1, "max_in_flight must be positive");
    require(max_voxels >= 1, "max_voxels must be positive");
}

SimulationConfig config_from_json(const nlohmann::json& j)
{
    require(j.is_object(), "expected a JSON object");
    SimulationConfig cfg;

    using Setter = std::function<void(const nlohmann::json&)>;
    auto number = [](double& dst) -> Setter { return [&dst](const nlohmann::json& v) { dst = v.get<double>(); }; };
    auto integer = [](int& dst) -> Setter { return [&dst](const nlohmann::json& v) { dst = v.get<int>(); }; };
    auto count = [](std::uint64_t& dst) -> Setter {
        return [&dst](const nlohmann::json& v) { dst = v.get<std::uint64_t>(); };
    };

    const std::map<std::string, Setter> setters = {
        {"f_ghz", [&cfg](const nlohmann::json& v) { cfg.carrier_frequency = v.get<double>() * 1e9; }},
        {"voxel_size", number(cfg.voxel_size)},
        {"d_v", integer(cfg.voxel_division)},
        {"d_sv", integer(cfg.subvoxel_division)},
        {"xi", number(cfg.scaling_factor)},
        {"r_s", number(cfg.sample_radius)},
        {"t_sdf", number(cfg.sdf_threshold)},
        {"r_s_refine", number(cfg.refine_sample_radius)},
        {"t_sdf_refine", number(cfg.refine_sdf_threshold)},
        {"kappa", integer(cfg.kappa)},
        {"rho", integer(cfg.refinement_iterations)},
        {"delta", number(cfg.convergence_threshold)},
        {"alpha", number(cfg.alpha)},
        {"beta", number(cfg.beta)},
        {"t_d", number(cfg.distance_threshold)},
        {"t_a", number(cfg.angle_threshold_deg)},
        {"max_interactions", integer(cfg.max_interactions)},
        {"max_diffractions", integer(cfg.max_diffractions)},
        {"diffraction_step", number(cfg.diffraction_step_deg)},
        {"ray_match_angle", number(cfg.ray_match_angle_deg)},
        {"trace_bias", number(cfg.trace_bias)},
        {"max_in_flight", count(cfg.max_in_flight)},
        {"max_voxels", count(cfg.max_voxels)},
    };

    for (const auto& [key, value] : j.items()) {
        const auto it = setters.find(key);
        require(it != setters.end(), "unknown key '" + key + "'");
        try {
            it->second(value);
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: key '" + key + "' has the wrong type");
        }
    }
    cfg.validate();
    return cfg;
}

nlohmann::json config_to_json(const SimulationConfig& cfg)
{
    return {
        {"f_ghz", cfg.carrier_frequency * 1e-9},
        {"voxel_size", cfg.voxel_size},
        {"d_v", cfg.voxel_division},
        {"d_sv", cfg.subvoxel_division},
        {"xi", cfg.scaling_factor},
        {"r_s", cfg.sample_radius},
        {"t_sdf", cfg.sdf_threshold},
        {"r_s_refine", cfg.refine_sample_radius},
        {"t_sdf_refine", cfg.refine_sdf_threshold},
        {"kappa", cfg.kappa},
        {"rho", cfg.refinement_iterations},
        {"delta", cfg.convergence_threshold},
        {"alpha", cfg.alpha},
        {"beta", cfg.beta},
        {"t_d", cfg.distance_threshold},
        {"t_a", cfg.angle_threshold_deg},
        {"max_interactions", cfg.max_interactions},
        {"max_diffractions", cfg.max_diffractions},
        {"diffraction_step", cfg.diffraction_step_deg},
        {"ray_match_angle", cfg.ray_match_angle_deg},
        {"trace_bias", cfg.trace_bias},
        {"max_in_flight", cfg.max_in_flight},
        {"max_voxels", cfg.max_voxels},
    };
}

} // namespace pcrl
