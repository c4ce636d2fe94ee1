#pragma once

#include "pcrl/surface_intersection.hpp"

#include <array>
#include <optional>
#include <vector>

namespace pcrl {

inline constexpr double kMarchEpsilonStep = 1e-2; ///< epsilon_s, voxel units
inline constexpr double kMarchEpsilonZero = 1e-16; ///< epsilon_z

/// One step of the voxel ray march. `a_dist` >= 1 is the number of voxel boundaries to cross
/// along the first axis that reaches them.
Vec3 voxel_ray_march_step(const Vec3& v_pos, const Vec3& r_dir, int a_dist);

/// Conical ray with two separation planes through `origin`. A point p is between the planes
/// when n . (p - origin) <= 0 for both normals.
struct ConeRay {
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitX();
    double half_angle = 0.0;
    std::array<Vec3, 2> sep_normals = {Vec3(-1.0, 0.0, 0.0), Vec3(-1.0, 0.0, 0.0)};
    int interaction_count = 0;
    int diffraction_count = 0;
    std::int64_t source_ie = -1; ///< never reported as a candidate

    /// Reflection cone: both separation planes face back along the direction.
    static ConeRay reflection(const Vec3& origin, const Vec3& direction, double half_angle);
};

/// True when a sphere meets the infinite cone (apex origin, axis dir, half angle).
bool cone_intersects_sphere(const Vec3& origin, const Vec3& dir, double half_angle, const Vec3& center, double radius);

/// Per-thread visit stamps; replaces a bounded history window so a voxel is evaluated at most once per ray.
class TraversalScratch {
public:
    std::uint32_t begin(std::size_t voxel_count);
    bool visit(std::size_t voxel); ///< false if already visited during the current ray

private:
    std::vector<std::uint32_t> stamps_;
    std::uint32_t epoch_ = 0;
};

struct ConeTraceStats {
    std::size_t samples = 0;
    std::size_t voxels_evaluated = 0;
};

/// Candidate IE ids (sorted, unique) gathered along the cone until it leaves the grid.
std::vector<std::uint32_t> trace_cone(const ConeRay& cone, const VoxelizedScene& scene,
                                      TraversalScratch* scratch = nullptr, ConeTraceStats* stats = nullptr);

/// Voxels that trace_cone evaluated for this cone, in visit order (testing hook).
std::vector<Vec3i> trace_cone_evaluated_voxels(const ConeRay& cone, const VoxelizedScene& scene);

/// Closest front-facing surface hit along origin + t dir with t in [t_min, t_max].
std::optional<SurfaceHit> cast_ray(const VoxelizedScene& scene, const Vec3& origin, const Vec3& dir, double t_min,
                                   double t_max, const SurfaceParams& surface);

struct Visibility {
    bool visible = false;
    std::optional<SurfaceHit> hit; ///< the landing hit for PCIE targets
};

/// Visibility of an IE reception point. PCIE targets are visible when the closest surface hit
/// belongs to that PCIE; DEIE / RXIE targets are visible when no surface is hit before the
/// target minus `bias`. Hits closer than `bias` to the origin are ignored in both cases.
Visibility trace_visibility(const VoxelizedScene& scene, const Vec3& origin, const IntersectableEntity& target,
                            std::int64_t target_id, double bias, const SurfaceParams& surface);

/// True when no surface is hit on the open segment shortened by `bias` at both ends.
bool segment_clear(const VoxelizedScene& scene, const Vec3& a, const Vec3& b, double bias, const SurfaceParams& surface);

/// alpha_c = 2 atan(l_v / d_scene) with d_scene the scene box diagonal.
double compute_cone_apex_angle(const VoxelGrid& grid, const Aabb& scene_bounds);

} // namespace pcrl
