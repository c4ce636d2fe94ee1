#include "pcrl/surface_intersection.hpp"

namespace pcrl {

double gaussian_weight(double d, double sigma)
{
    return std::exp(-(d * d) / (2.0 * sigma * sigma));
}

SurfaceSample evaluate_surface(const Vec3& x, std::span<const LabeledPoint> points, double sigma)
{
    SurfaceSample s;
    s.position = x;
    const double inv = 1.0 / (2.0 * sigma * sigma);
    Vec3 pos = Vec3::Zero();
    Vec3 nrm = Vec3::Zero();
    double total = 0.0;
    for (const auto& p : points) {
        const double w = std::exp(-(x - p.position).squaredNorm() * inv);
        total += w;
        pos += w * p.position;
        nrm += w * p.normal;
    }
    s.total_weight = total;
    const double len = nrm.norm();
    if (total < kWeightUnderflow || !(len > kWeightUnderflow * 1e-3))
        return s;
    s.weighted_position = pos / total;
    s.weighted_normal = nrm / len;
    s.sdf = (x - s.weighted_position).dot(s.weighted_normal);
    s.valid = true;
    return s;
}

namespace {

constexpr int kMaxMarchSteps = 512;
constexpr int kBisections = 3;

} // namespace

std::optional<SurfaceHit> intersect_primitive(const Vec3& origin, const Vec3& dir, const VoxelizedScene& scene,
                                              std::uint32_t primitive, const SurfaceParams& surface, double t_min,
                                              double t_max)
{
    const AabbPrimitive& prim = scene.primitives[primitive];
    const std::span<const LabeledPoint> pts(scene.points.data() + prim.point_first, prim.point_count);
    const VoxelGrid& grid = scene.grid;
    const double half = grid.voxel_diameter() / (2.0 * grid.voxel_division * grid.subvoxel_division);

    const double t_center = (prim.box.center() - origin).dot(dir);
    const double t_begin = std::max(t_center - half, t_min);
    const double t_end = std::min(t_center + half, t_max);
    if (t_begin > t_end)
        return std::nullopt;

    auto sample = [&](double t) { return evaluate_surface(origin + t * dir, pts, surface.sigma); };

    // Only front-facing crossings (ray against the local normal) are surfaces; rays leaving a
    // surface therefore never re-hit it or its neighbouring cells.
    auto finish = [&](double t, double lo, double hi) -> std::optional<SurfaceHit> {
        SurfaceSample s = sample(t);
        if (s.valid) {
            const double dn = dir.dot(s.weighted_normal);
            if (dn < -1e-3) {
                const double tn = std::clamp(t - s.sdf / dn, lo, hi);
                const SurfaceSample sn = sample(tn);
                if (sn.valid && std::abs(sn.sdf) <= std::abs(s.sdf)) {
                    t = tn;
                    s = sn;
                }
            }
        }
        if (!s.valid || dir.dot(s.weighted_normal) >= 0.0 || t < t_min || t > t_max)
            return std::nullopt;
        const Vec3 point = origin + t * dir;
        if (!prim.box.contains(point, surface.sdf_threshold))
            return std::nullopt;
        SurfaceHit hit;
        hit.point = point;
        hit.normal = s.weighted_normal;
        hit.pcie = prim.pcie;
        hit.primitive = primitive;
        hit.label = scene.ies[prim.pcie].label;
        hit.distance = t;
        return hit;
    };

    double t = t_begin;
    double t_prev = t;
    SurfaceSample prev;
    for (int iter = 0; iter < kMaxMarchSteps; ++iter) {
        const SurfaceSample s = sample(t);
        if (s.valid) {
            const double dn = dir.dot(s.weighted_normal);
            if (prev.valid && prev.sdf > 0.0 && s.sdf <= 0.0 && dn < 0.0) {
                double lo = t_prev;
                double hi = t;
                for (int b = 0; b < kBisections; ++b) {
                    const double mid = 0.5 * (lo + hi);
                    const SurfaceSample m = sample(mid);
                    if (!m.valid)
                        break;
                    (m.sdf > 0.0 ? lo : hi) = mid;
                }
                return finish(0.5 * (lo + hi), lo, hi);
            }
            if (std::abs(s.sdf) < surface.sdf_threshold && dn < 0.0)
                return finish(t, t - half, t + half);
        }
        if (t >= t_end)
            break;
        const double step = s.valid ? std::max(std::abs(s.sdf), surface.sdf_threshold) : surface.sample_radius;
        prev = s;
        t_prev = t;
        t = std::min(t + step, t_end);
    }
    return std::nullopt;
}

Vec3 refine_normal(const SurfaceHit& hit, const VoxelizedScene& scene, double sigma)
{
    const Vec3i cell = scene.primitives[hit.primitive].cell;
    const double inv = 1.0 / (2.0 * sigma * sigma);
    Vec3 nrm = Vec3::Zero();
    double total = 0.0;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const std::int64_t id = scene.primitive_at(cell + Vec3i(dx, dy, dz));
                if (id < 0)
                    continue;
                const AabbPrimitive& prim = scene.primitives[static_cast<std::size_t>(id)];
                for (std::uint32_t k = 0; k < prim.point_count; ++k) {
                    const LabeledPoint& p = scene.points[prim.point_first + k];
                    const double w = std::exp(-(hit.point - p.position).squaredNorm() * inv);
                    total += w;
                    nrm += w * p.normal;
                }
            }
    const double len = nrm.norm();
    if (total < kWeightUnderflow || !(len > 0.0))
        return hit.normal;
    return nrm / len;
}

} // namespace pcrl
