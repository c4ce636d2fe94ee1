#pragma once

// Brute-force ground truth for tests. Deliberately self-contained: it uses its own small vector
// type and none of the solver's geometry so that agreement between the two is meaningful.

#include "pcrl/scene_model.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace pcrl::oracle {

using OVec = std::array<double, 3>;

/// Rectangle centred at `center` spanning +-half_u along axis_u and +-half_v along axis_v
/// (infinite when a half extent is infinite). `normal` = axis_u x axis_v faces the free space.
struct Plane {
    OVec center{};
    OVec normal{0.0, 0.0, 1.0};
    OVec axis_u{1.0, 0.0, 0.0};
    OVec axis_v{0.0, 1.0, 0.0};
    double half_u = std::numeric_limits<double>::infinity();
    double half_v = std::numeric_limits<double>::infinity();
    std::uint32_t label = 0;
};

struct Edge {
    OVec start{};
    OVec end{};
    int id = 0;
};

struct AnalyticScene {
    std::vector<Plane> planes;
    std::vector<Edge> edges;
    OVec tx{};
    OVec rx{};
};

struct Path {
    std::vector<int> planes; ///< mirror sequence (indices into AnalyticScene::planes)
    std::vector<OVec> points; ///< TX, reflection points, RX
    double length = 0.0;
};

/// Every mirror sequence up to max_order (no plane twice in a row) whose reflection points lie on
/// the rectangles and whose segments are unobstructed. Throws std::invalid_argument above order 4.
std::vector<Path> image_method_paths(const AnalyticScene& scene, int max_order);

struct EdgeStationary {
    double t = 0.0; ///< distance from the edge start (m)
    OVec point{};
    double length = 0.0;
};

/// Golden-section minimiser of |P(t) - tx| + |P(t) - rx| over the edge; empty when the minimiser
/// sits at an end point.
std::optional<EdgeStationary> edge_stationary_point(const Edge& edge, const OVec& tx, const OVec& rx);

/// Uniform random samples on every finite rectangle, round(area * density) points each, with the
/// exact plane normal and label.
PointCloud sample_scene_to_cloud(const AnalyticScene& scene, double density, std::uint64_t seed);

/// Axis-aligned room [0, sx] x [0, sy] x [0, sz] with inward-facing walls labelled 0..5
/// (x = 0, x = sx, y = 0, y = sy, z = 0, z = sz).
AnalyticScene make_box_room(const OVec& size, const OVec& tx, const OVec& rx);

/// Largest angle (rad) between the incoming and outgoing ray angles with the plane normal over
/// the path's reflections, evaluated in oracle arithmetic.
double specular_error(const AnalyticScene& scene, const Path& path);

using OIndex = std::array<int, 3>;

/// Distance along any axis to the nearest occupied voxel by scanning every occupied voxel;
/// -1 everywhere when nothing is occupied. `occupied` is x-fastest.
std::vector<int> brute_chebyshev(const OIndex& dims, const std::vector<std::uint8_t>& occupied);

struct DdaCell {
    OIndex voxel{};
    double t_enter = 0.0;
    double t_exit = 0.0;
};

/// Voxels of the unit lattice [0, dims) crossed by origin + t dir (t >= 0) in order, with the ray
/// parameter interval spent in each. `origin` is in voxel units and must lie inside the lattice.
std::vector<DdaCell> exact_dda(const OVec& origin, const OVec& dir, const OIndex& dims);

} // namespace pcrl::oracle
