#pragma once

#include "pcrl/config.hpp"
#include "pcrl/voxelization.hpp"

#include <optional>
#include <span>

namespace pcrl {

/// Total weight below which the weighted averages are treated as undefined.
inline constexpr double kWeightUnderflow = 1e-12;

/// exp(-d^2 / (2 sigma^2)).
double gaussian_weight(double d, double sigma);

struct SurfaceSample {
    Vec3 position = Vec3::Zero();
    Vec3 weighted_position = Vec3::Zero();
    Vec3 weighted_normal = Vec3::UnitZ();
    double sdf = 0.0;
    double total_weight = 0.0;
    bool valid = false;
};

/// Gaussian-weighted plane estimate of the point set around x; sdf > 0 on the normal side.
SurfaceSample evaluate_surface(const Vec3& x, std::span<const LabeledPoint> points, double sigma);

struct SurfaceHit {
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    std::uint32_t pcie = 0;
    std::uint32_t primitive = 0;
    std::uint32_t label = 0;
    double distance = 0.0;
};

/// Short-range sphere tracing along the ray inside one primitive. Only hits with distance in
/// [t_min, t_max] are reported; samples whose local surface recedes from the ray never count.
std::optional<SurfaceHit> intersect_primitive(const Vec3& origin, const Vec3& dir, const VoxelizedScene& scene,
                                              std::uint32_t primitive, const SurfaceParams& surface,
                                              double t_min = 0.0,
                                              double t_max = std::numeric_limits<double>::infinity());

/// Re-evaluates the weighted normal at the hit using the primitive and its 26 neighbouring cells.
Vec3 refine_normal(const SurfaceHit& hit, const VoxelizedScene& scene, double sigma);

} // namespace pcrl
