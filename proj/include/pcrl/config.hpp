#pragma once

#include "pcrl/math.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace pcrl {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sampling parameters of the point-set surface for one phase (coarse tracing or refinement).
struct SurfaceParams {
    double sample_radius = 0.015; ///< r_s, also the fallback march stride (m)
    double sdf_threshold = 0.0015; ///< t_sdf (m)
    double sigma = 0.03; ///< Gaussian width, xi * r_s (m)
};

struct SimulationConfig {
    double carrier_frequency = 60e9; ///< Hz
    double voxel_size = 0.5; ///< l_v (m)
    int voxel_division = 2; ///< D_v
    int subvoxel_division = 4; ///< D_sv
    double scaling_factor = 2.0; ///< xi

    double sample_radius = 0.015; ///< coarse r_s (m)
    double sdf_threshold = 0.0015; ///< coarse t_sdf (m)
    double refine_sample_radius = 0.003; ///< refinement r_s (m)
    double refine_sdf_threshold = 0.0005; ///< refinement t_sdf (m)

    int kappa = 100; ///< coarse paths kept per (rx, label/kind signature)
    int refinement_iterations = 2000; ///< rho
    double convergence_threshold = 1e-4; ///< delta, on the squared gradient norm (m^2 units of f)
    double alpha = 0.4;
    double beta = 0.4;
    double distance_threshold = 0.002; ///< t_d (m)
    double angle_threshold_deg = 1.0; ///< t_a

    int max_interactions = 3;
    int max_diffractions = 0;
    double diffraction_step_deg = 2.5;
    double ray_match_angle_deg = 1.0;

    /// Distance ignored at the ends of visibility segments (m). Non-positive selects 2 * t_sdf.
    double trace_bias = 0.0;
    std::uint64_t max_in_flight = 1ull << 24;
    std::uint64_t max_voxels = 1ull << 28;

    double wavelength() const { return kSpeedOfLight / carrier_frequency; }
    double sigma() const { return scaling_factor * sample_radius; }
    double refine_sigma() const { return scaling_factor * refine_sample_radius; }
    SurfaceParams coarse_surface() const { return {sample_radius, sdf_threshold, sigma()}; }
    SurfaceParams refine_surface() const
    {
        return {refine_sample_radius, refine_sdf_threshold, refine_sigma()};
    }
    double coarse_bias() const { return trace_bias > 0.0 ? trace_bias : 2.0 * sdf_threshold; }
    double refine_bias() const { return trace_bias > 0.0 ? trace_bias : 2.0 * refine_sdf_threshold; }

    /// Throws ConfigError naming the first violated constraint.
    void validate() const;
};

/// Reads the solver parameters from a JSON object keyed by symbol names
/// (voxel_size, d_v, d_sv, xi, r_s, t_sdf, kappa, rho, ...). Unknown keys are rejected.
SimulationConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const SimulationConfig& cfg);

} // namespace pcrl
