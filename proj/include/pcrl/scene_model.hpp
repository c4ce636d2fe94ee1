#pragma once

#include "pcrl/math.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcrl {

/// Input that does not satisfy a file schema or a domain invariant.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LabeledPoint {
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    std::uint32_t label = 0;
};

class PointCloud {
public:
    PointCloud() = default;
    /// Throws InputError on an empty set, non-finite positions or non-unit normals.
    explicit PointCloud(std::vector<LabeledPoint> points);

    const std::vector<LabeledPoint>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const LabeledPoint& operator[](std::size_t i) const { return points_[i]; }
    const Aabb& bounds() const { return bounds_; }

private:
    std::vector<LabeledPoint> points_;
    Aabb bounds_;
};

/// Exterior wedge edge. The two faces meet along start->end and enclose the solid; the free
/// space around the edge spans exterior_angle = n_exp * pi with 1 < n_exp < 2.
struct DiffractionEdge {
    int id = 0;
    Vec3 start = Vec3::Zero();
    Vec3 end = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();
    Vec3 face0_normal = Vec3::UnitX();
    Vec3 face1_normal = Vec3::UnitY();
    Vec3 face0_tangent = Vec3::UnitY();
    Vec3 face1_tangent = Vec3::UnitX();
    double n_exp = 1.5;

    double length() const { return (end - start).norm(); }
    double exterior_angle() const { return n_exp * kPi; }
    Vec3 point_at(double t) const { return start + t * direction; }
};

/// Computes the exterior angle factor from the face frame; the result is < 1 for concave corners.
double exterior_angle_factor(const Vec3& face0_normal, const Vec3& face0_tangent, const Vec3& face1_tangent);

/// Normalizes direction and checks every invariant. Throws InputError naming the edge id.
DiffractionEdge make_edge(int id, const Vec3& start, const Vec3& end, const Vec3& face0_normal,
                          const Vec3& face1_normal, const Vec3& face0_tangent, const Vec3& face1_tangent);

enum class EndpointKind { Transmitter, Receiver };

struct RadioEndpoint {
    Vec3 position = Vec3::Zero();
    EndpointKind kind = EndpointKind::Transmitter;
    int id = 0;
};

struct Endpoints {
    std::vector<RadioEndpoint> transmitters;
    std::vector<RadioEndpoint> receivers;
};

// PLY vertices with x, y, z, nx, ny, nz, label. ASCII and binary little-endian are read.
PointCloud load_point_cloud(const std::filesystem::path& path);
void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path, bool binary = true);

/// JSON: {"edges": [{"id", "start", "end", "face0_normal", "face1_normal",
///                   "face0_tangent", "face1_tangent", "n_exp"?}]}
std::vector<DiffractionEdge> load_edges(const std::filesystem::path& path);
void save_edges(const std::vector<DiffractionEdge>& edges, const std::filesystem::path& path);

/// JSON: {"transmitters": [{"id", "position"}], "receivers": [...]}
Endpoints load_endpoints(const std::filesystem::path& path);
void save_endpoints(const Endpoints& endpoints, const std::filesystem::path& path);

/// Checks that every endpoint lies inside the box grown by `margin`. Throws InputError.
void validate_endpoints(const Endpoints& endpoints, const Aabb& bounds, double margin);

struct NormalEstimate {
    PointCloud cloud;
    std::vector<std::uint32_t> flagged; ///< points whose neighborhood had fewer than 3 members
};

/// Least-squares plane normals over a radius neighborhood. The sign follows the prior normal.
NormalEstimate estimate_normals(const PointCloud& cloud, double radius);

/// Displaces every point along its normal by N(0, stddev); deterministic per seed.
PointCloud apply_normal_noise(const PointCloud& cloud, double stddev, std::uint64_t seed);

} // namespace pcrl
