#pragma once

// Small scene builders shared by the unit and acceptance tests.

#include "pcrl/config.hpp"
#include "pcrl/reference_oracle.hpp"
#include "pcrl/scene_model.hpp"
#include "pcrl/voxelization.hpp"

#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

namespace fixtures {

using pcrl::LabeledPoint;
using pcrl::Vec3;

/// Regular lattice of points on the rectangle corner + [0, len_u] u + [0, len_v] v, normal u x v.
inline std::vector<LabeledPoint> grid_plane(const Vec3& corner, const Vec3& u, const Vec3& v, double len_u,
                                            double len_v, double spacing, std::uint32_t label = 0)
{
    std::vector<LabeledPoint> pts;
    const int nu = static_cast<int>(std::floor(len_u / spacing + 1e-9));
    const int nv = static_cast<int>(std::floor(len_v / spacing + 1e-9));
    const Vec3 n = u.cross(v).normalized();
    for (int j = 0; j <= nv; ++j)
        for (int i = 0; i <= nu; ++i)
            pts.push_back({corner + (i * spacing) * u + (j * spacing) * v, n, label});
    return pts;
}

/// Square patch of the plane z = height centred on (cx, cy), facing +z (or -z when flipped).
inline std::vector<LabeledPoint> horizontal_patch(double cx, double cy, double height, double half, double spacing,
                                                  std::uint32_t label = 0, bool flipped = false)
{
    if (flipped)
        return grid_plane(Vec3(cx - half, cy - half, height), Vec3::UnitY(), Vec3::UnitX(), 2 * half, 2 * half,
                          spacing, label);
    return grid_plane(Vec3(cx - half, cy - half, height), Vec3::UnitX(), Vec3::UnitY(), 2 * half, 2 * half, spacing,
                      label);
}

inline pcrl::PointCloud join(std::initializer_list<std::vector<LabeledPoint>> parts)
{
    std::vector<LabeledPoint> all;
    for (const auto& p : parts)
        all.insert(all.end(), p.begin(), p.end());
    return pcrl::PointCloud(std::move(all));
}

inline pcrl::oracle::OVec ov(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
inline Vec3 ev(const pcrl::oracle::OVec& v) { return Vec3(v[0], v[1], v[2]); }

inline pcrl::RadioEndpoint tx_at(const Vec3& p, int id = 0) { return {p, pcrl::EndpointKind::Transmitter, id}; }
inline pcrl::RadioEndpoint rx_at(const Vec3& p, int id = 0) { return {p, pcrl::EndpointKind::Receiver, id}; }

/// 90 degree exterior corner along `direction` through `start`: the solid fills the quadrant
/// spanned by -a and -b, so the faces have outward normals b and a.
inline pcrl::DiffractionEdge right_angle_edge(int id, const Vec3& start, const Vec3& end, const Vec3& a,
                                              const Vec3& b)
{
    return pcrl::make_edge(id, start, end, b, a, -a, -b);
}

inline std::filesystem::path temp_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("pcrl_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace fixtures
