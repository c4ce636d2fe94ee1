#pragma once

#include "pcrl/scene_model.hpp"

#include <array>
#include <optional>
#include <vector>

namespace pcrl {

/// Fan ray in the plane orthogonal to the edge, in the frame x = face0 tangent, y = face0 normal.
struct FanRay2D {
    Vec2 direction = Vec2::UnitX();
    std::array<Vec2, 2> sep_tangents = {Vec2::UnitX(), Vec2::UnitX()}; ///< wedge start / end
    double angle = 0.0; ///< of direction, measured from the face0 tangent toward the face0 normal
};

struct EdgeFan2D {
    std::vector<FanRay2D> rays;
    double extent = 0.0; ///< exterior angle covered by the fan (rad)
    double wedge = 0.0; ///< angular width of each ray's wedge (rad)
};

/// Fan of `count` equal wedges covering the exterior angle of the edge.
EdgeFan2D make_edge_fan(const DiffractionEdge& edge, int count);

/// Fan with wedges no wider than `angular_step_deg`. Throws InputError for a degenerate face frame.
EdgeFan2D precompute_edge_fan(const DiffractionEdge& edge, double angular_step_deg);

/// max(1, ceil(base_count |sin theta|)).
int optimal_ray_count(int base_count, double theta);

struct KellerRay {
    Vec3 direction = Vec3::UnitX();
    std::array<Vec3, 2> sep_normals = {Vec3::UnitX(), Vec3::UnitX()}; ///< point away from the wedge
};

struct KellerLaunchSet {
    double theta = 0.0; ///< angle between the edge direction and the incident direction
    std::vector<KellerRay> rays;
};

/// Lifts the fan onto the Keller cone of the incident direction. Empty when the incident ray runs
/// along the edge.
std::optional<KellerLaunchSet> lift_to_keller_cone(const EdgeFan2D& fan, const DiffractionEdge& edge,
                                                   const Vec3& incident_direction);

} // namespace pcrl
