#pragma once

#include "pcrl/path_refinement.hpp"

#include <optional>
#include <vector>

namespace pcrl {

/// First Fresnel zone radius sqrt(lambda s1 s2 / (s1 + s2)). Throws std::invalid_argument unless all are positive.
double fresnel_radius(double s1, double s2, double wavelength);

/// Label of the nearest cloud point within `radius` of `point`; otherwise the label of the PCIE
/// owning the point's subvoxel, otherwise `fallback`.
std::uint32_t resolve_exact_label(const Vec3& point, const VoxelizedScene& scene, double radius,
                                  std::uint32_t fallback = 0);

struct FresnelCheckContext {
    double wavelength = kSpeedOfLight / 60e9;
    double ray_match_angle_deg = 1.0;
};

/// Hash of the (kind, label) chain of a refined path.
std::uint64_t refined_signature(const RefinedPath& path);

/// Same transmitter, receiver and kind chain; every interaction of `candidate` inside the Fresnel
/// radius of the matching interaction of `accepted`; every ray pair closer than the match angle.
bool is_duplicate(const RefinedPath& candidate, const RefinedPath& accepted, const FresnelCheckContext& ctx);

/// Shortest per (tx, rx, signature), then greedy delay-ordered Fresnel / ray-angle elimination.
/// The output is sorted by delay.
std::vector<RefinedPath> dedupe_refined(std::vector<RefinedPath> paths, const FresnelCheckContext& ctx);

} // namespace pcrl
