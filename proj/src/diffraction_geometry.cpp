#include "pcrl/diffraction_geometry.hpp"

#include <string>

namespace pcrl {

namespace {

void check_frame(const DiffractionEdge& edge)
{
    if (edge.face0_tangent.cross(edge.face1_tangent).norm() < 1e-9 ||
        std::abs(edge.face0_tangent.dot(edge.direction)) > 1e-4 || std::abs(edge.face0_normal.dot(edge.direction)) > 1e-4)
        throw InputError("edge " + std::to_string(edge.id) + ": degenerate face frame");
}

Vec2 unit(double angle) { return Vec2(std::cos(angle), std::sin(angle)); }

} // namespace

EdgeFan2D make_edge_fan(const DiffractionEdge& edge, int count)
{
    check_frame(edge);
    EdgeFan2D fan;
    fan.extent = edge.exterior_angle();
    count = std::max(1, count);
    fan.wedge = fan.extent / count;
    fan.rays.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        FanRay2D ray;
        ray.angle = (i + 0.5) * fan.wedge;
        ray.direction = unit(ray.angle);
        ray.sep_tangents = {unit(i * fan.wedge), unit((i + 1) * fan.wedge)};
        fan.rays.push_back(ray);
    }
    return fan;
}

EdgeFan2D precompute_edge_fan(const DiffractionEdge& edge, double angular_step_deg)
{
    if (!(angular_step_deg > 0.0))
        throw std::invalid_argument("precompute_edge_fan: angular step must be positive");
    const double extent = edge.exterior_angle();
    const int count = static_cast<int>(std::ceil(extent / deg_to_rad(angular_step_deg) - 1e-9));
    return make_edge_fan(edge, count);
}

int optimal_ray_count(int base_count, double theta)
{
    return std::max(1, static_cast<int>(std::ceil(base_count * std::abs(std::sin(theta)) - 1e-9)));
}

std::optional<KellerLaunchSet> lift_to_keller_cone(const EdgeFan2D& fan, const DiffractionEdge& edge,
                                                   const Vec3& incident_direction)
{
    const Vec3& e = edge.direction;
    const double cos_theta = std::clamp(incident_direction.normalized().dot(e), -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    const double sin_theta = std::sin(theta);
    if (sin_theta < 1e-6)
        return std::nullopt;

    Eigen::Matrix<double, 3, 2> frame;
    frame.col(0) = edge.face0_tangent;
    frame.col(1) = edge.face0_normal;

    KellerLaunchSet out;
    out.theta = theta;
    out.rays.reserve(fan.rays.size());
    for (const auto& r : fan.rays) {
        KellerRay k;
        k.sep_normals = {Vec3::Zero(), Vec3::Zero()};
        k.direction = (frame * r.direction * sin_theta + e * cos_theta).normalized();
        // A wedge of pi or more is not an intersection of two half-spaces; leave it unbounded.
        for (int j = 0; j < 2 && fan.wedge < kPi - 1e-12; ++j) {
            const Vec3 tangent = frame * r.sep_tangents[j] * sin_theta + e * cos_theta;
            Vec3 n = tangent.cross(e).normalized();
            if (n.dot(k.direction) > 0.0)
                n = -n;
            k.sep_normals[j] = n;
        }
        out.rays.push_back(k);
    }
    return out;
}

} // namespace pcrl
