#include "pcrl/traversal.hpp"

#include <algorithm>

namespace pcrl {

Vec3 voxel_ray_march_step(const Vec3& v_pos, const Vec3& r_dir, int a_dist)
{
    const Vec3 c = v_pos.array().floor();
    const Vec3 l = (r_dir.array() >= 0.0).cast<double>();
    const Vec3 s_unit = r_dir.cwiseAbs().cwiseMax(Vec3::Constant(kMarchEpsilonZero)).cwiseInverse();
    const Vec3 d_next = (l - (v_pos - c)).cwiseAbs();
    const Vec3 s_next = d_next.cwiseProduct(s_unit);
    const Vec3 t = s_next + s_unit * static_cast<double>(a_dist - 1);
    const Vec3 x((t.x() <= t.y() && t.x() <= t.z()) ? 1.0 : 0.0, (t.y() < t.x() && t.y() <= t.z()) ? 1.0 : 0.0,
                 (t.z() < t.x() && t.z() < t.y()) ? 1.0 : 0.0);
    const double s_total = t.dot(x) + kMarchEpsilonStep;
    return v_pos + r_dir * s_total;
}

ConeRay ConeRay::reflection(const Vec3& origin, const Vec3& direction, double half_angle)
{
    ConeRay cone;
    cone.origin = origin;
    cone.direction = direction;
    cone.half_angle = half_angle;
    cone.sep_normals = {-direction, -direction};
    return cone;
}

bool cone_intersects_sphere(const Vec3& origin, const Vec3& dir, double half_angle, const Vec3& center, double radius)
{
    const Vec3 oc = center - origin;
    const double dist = oc.norm();
    if (dist <= radius)
        return true;
    return angle_between(oc, dir) <= half_angle + std::asin(std::min(1.0, radius / dist));
}

std::uint32_t TraversalScratch::begin(std::size_t voxel_count)
{
    if (stamps_.size() != voxel_count) {
        stamps_.assign(voxel_count, 0);
        epoch_ = 0;
    }
    if (++epoch_ == 0) {
        std::fill(stamps_.begin(), stamps_.end(), 0);
        epoch_ = 1;
    }
    return epoch_;
}

bool TraversalScratch::visit(std::size_t voxel)
{
    if (stamps_[voxel] == epoch_)
        return false;
    stamps_[voxel] = epoch_;
    return true;
}

namespace {

bool between_planes(const ConeRay& cone, const Vec3& p)
{
    const Vec3 rel = p - cone.origin;
    return cone.sep_normals[0].dot(rel) <= 0.0 && cone.sep_normals[1].dot(rel) <= 0.0;
}

// Marches the cone axis and hands every voxel that may touch the cone to `evaluate`.
// At a sample with true IE distance d, all IE voxels the cone can reach before the next sample lie
// within Chebyshev radius s + 1 + K of the current voxel, where s + 1 is the march distance used and
// K bounds the reach of the dilated cone cross-section. With K = 0 this is the 26-neighbourhood rule.
template <typename Evaluate>
void march_cone(const ConeRay& cone, const VoxelizedScene& scene, TraversalScratch& scratch, ConeTraceStats* stats,
                Evaluate&& evaluate)
{
    const VoxelGrid& grid = scene.grid;
    const MarchDistanceField& field = scene.field;
    const Vec3i dims = grid.dims;

    double t_enter = 0.0;
    double t_exit = 0.0;
    if (!ray_aabb(cone.origin, cone.direction, grid.bounds(), 0.0, std::numeric_limits<double>::infinity(), t_enter,
                  t_exit))
        return;
    scratch.begin(grid.voxel_count());

    const double l_v = grid.voxel_edge;
    const double sphere_vox = 0.5 * std::sqrt(3.0);
    const double tan_h = std::tan(std::min(cone.half_angle, 1.5));
    const int k_cap = dims.maxCoeff();
    auto reach = [&](double t_world) {
        const double rho = sphere_vox + (t_world / l_v) * tan_h;
        return std::min(k_cap, static_cast<int>(std::floor(rho + 0.5 + 1e-9)));
    };
    auto far_t = [&](double t_world, int s) {
        return t_world + ((s + 1) * std::sqrt(3.0) + kMarchEpsilonStep) * l_v;
    };

    Vec3 v = grid.to_voxel(cone.origin + (t_enter + 1e-9 * l_v) * cone.direction);
    const int max_iter = 4 * (dims.sum() + 4);
    for (int iter = 0; iter < max_iter; ++iter) {
        const Vec3i c = VoxelGrid::floor_index(v);
        const int a = field.march_distance(c);
        if (a == MarchDistanceField::kTerminate)
            break;
        if (stats)
            ++stats->samples;
        const int d = field.has_ies(c) ? 0 : a;
        const double t_here = (grid.to_world(v) - cone.origin).dot(cone.direction);

        // Largest skip that keeps the reachable band inside the IE-free region.
        int skip = d - 2 - reach(far_t(t_here, std::max(0, d - 2)));
        for (int guard = 0; guard < 4 && skip >= 0; ++guard) {
            const int next = d - 2 - reach(far_t(t_here, skip));
            if (next >= skip)
                break;
            skip = next;
        }
        if (skip >= 0) {
            v = voxel_ray_march_step(v, cone.direction, skip + 1);
            continue;
        }

        const int s = std::max(0, d - 1);
        const int m = s + 1 + reach(far_t(t_here, s));
        const Vec3i lo = (c - Vec3i::Constant(m)).cwiseMax(Vec3i::Zero());
        const Vec3i hi = (c + Vec3i::Constant(m)).cwiseMin(dims - Vec3i::Ones());
        for (int z = lo.z(); z <= hi.z(); ++z)
            for (int y = lo.y(); y <= hi.y(); ++y)
                for (int x = lo.x(); x <= hi.x(); ++x) {
                    const Vec3i q(x, y, z);
                    if (!field.has_ies(q))
                        continue;
                    if (!scratch.visit(grid.linear(q)))
                        continue;
                    if (stats)
                        ++stats->voxels_evaluated;
                    evaluate(q);
                }
        v = voxel_ray_march_step(v, cone.direction, s + 1);
    }
}

} // namespace

std::vector<std::uint32_t> trace_cone(const ConeRay& cone, const VoxelizedScene& scene, TraversalScratch* scratch,
                                      ConeTraceStats* stats)
{
    TraversalScratch local;
    TraversalScratch& work = scratch ? *scratch : local;
    const VoxelGrid& grid = scene.grid;
    const double voxel_radius = 0.5 * grid.voxel_diameter();
    const double subvoxel_radius = 0.5 * std::sqrt(3.0) * grid.subvoxel_edge();

    std::vector<std::uint32_t> out;
    march_cone(cone, scene, work, stats, [&](const Vec3i& q) {
        if (!cone_intersects_sphere(cone.origin, cone.direction, cone.half_angle, grid.voxel_center(q), voxel_radius))
            return;
        const std::uint32_t first = scene.field.ie_offset(q);
        const std::uint32_t count = scene.field.ie_count(q);
        for (std::uint32_t k = first; k < first + count; ++k) {
            if (static_cast<std::int64_t>(k) == cone.source_ie)
                continue;
            const IntersectableEntity& ie = scene.ies[k];
            if (!between_planes(cone, ie.reception_point))
                continue;
            const bool coarse_rx = ie.kind == IeKind::Receiver && cone.interaction_count <= 2;
            if (!coarse_rx && !cone_intersects_sphere(cone.origin, cone.direction, cone.half_angle,
                                                      grid.subvoxel_center(ie.subvoxel), subvoxel_radius))
                continue;
            out.push_back(k);
        }
    });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<Vec3i> trace_cone_evaluated_voxels(const ConeRay& cone, const VoxelizedScene& scene)
{
    TraversalScratch scratch;
    std::vector<Vec3i> out;
    march_cone(cone, scene, scratch, nullptr, [&](const Vec3i& q) { out.push_back(q); });
    return out;
}

std::optional<SurfaceHit> cast_ray(const VoxelizedScene& scene, const Vec3& origin, const Vec3& dir, double t_min,
                                   double t_max, const SurfaceParams& surface)
{
    const VoxelGrid& grid = scene.grid;
    double t_enter = 0.0;
    double t_exit = 0.0;
    if (!(t_max >= t_min) || !ray_aabb(origin, dir, grid.bounds(), t_min, t_max, t_enter, t_exit))
        return std::nullopt;

    // Amanatides-Woo walk over subvoxels; primitives of the PCIE in each subvoxel are slab-tested.
    const double h = grid.subvoxel_edge();
    const Vec3i sdims = grid.subvoxel_dims();
    const Vec3 start = (origin + t_enter * dir - grid.origin) / h;
    Vec3i cell = VoxelGrid::floor_index(start).cwiseMax(Vec3i::Zero()).cwiseMin(sdims - Vec3i::Ones());
    Vec3i step;
    Vec3 t_next, t_delta;
    for (int a = 0; a < 3; ++a) {
        if (dir[a] > 0.0) {
            step[a] = 1;
            t_delta[a] = h / dir[a];
            t_next[a] = (grid.origin[a] + (cell[a] + 1) * h - origin[a]) / dir[a];
        } else if (dir[a] < 0.0) {
            step[a] = -1;
            t_delta[a] = -h / dir[a];
            t_next[a] = (grid.origin[a] + cell[a] * h - origin[a]) / dir[a];
        } else {
            step[a] = 0;
            t_delta[a] = std::numeric_limits<double>::infinity();
            t_next[a] = std::numeric_limits<double>::infinity();
        }
    }

    std::optional<SurfaceHit> best;
    double best_t = t_max;
    double t_cell = t_enter;
    for (;;) {
        const std::int32_t pcie = scene.subvoxel_pcie[grid.subvoxel_linear(cell)];
        if (pcie >= 0) {
            const IntersectableEntity& ie = scene.ies[static_cast<std::size_t>(pcie)];
            for (std::uint32_t p = ie.primitive_first; p < ie.primitive_first + ie.primitive_count; ++p) {
                double b0 = 0.0;
                double b1 = 0.0;
                if (!ray_aabb(origin, dir, scene.primitives[p].box, t_min, best_t, b0, b1))
                    continue;
                if (auto hit = intersect_primitive(origin, dir, scene, p, surface, t_min, best_t)) {
                    if (hit->distance < best_t || !best) {
                        best_t = hit->distance;
                        best = hit;
                    }
                }
            }
        }
        const int axis = (t_next.x() <= t_next.y() && t_next.x() <= t_next.z()) ? 0 : (t_next.y() <= t_next.z() ? 1 : 2);
        t_cell = t_next[axis];
        if (t_cell > best_t || t_cell > t_exit)
            break;
        cell[axis] += step[axis];
        if (cell[axis] < 0 || cell[axis] >= sdims[axis])
            break;
        t_next[axis] += t_delta[axis];
    }
    return best;
}

Visibility trace_visibility(const VoxelizedScene& scene, const Vec3& origin, const IntersectableEntity& target,
                            std::int64_t target_id, double bias, const SurfaceParams& surface)
{
    Visibility out;
    const Vec3 delta = target.reception_point - origin;
    const double dist = delta.norm();
    if (dist <= bias)
        return out;
    const Vec3 dir = delta / dist;
    if (target.kind == IeKind::PointCloud) {
        const double slack = std::sqrt(3.0) * scene.grid.subvoxel_edge();
        auto hit = cast_ray(scene, origin, dir, bias, dist + slack, surface);
        if (hit && static_cast<std::int64_t>(hit->pcie) == target_id) {
            out.visible = true;
            out.hit = hit;
        }
        return out;
    }
    out.visible = !cast_ray(scene, origin, dir, bias, dist - bias, surface).has_value();
    return out;
}

bool segment_clear(const VoxelizedScene& scene, const Vec3& a, const Vec3& b, double bias, const SurfaceParams& surface)
{
    const Vec3 delta = b - a;
    const double dist = delta.norm();
    if (dist <= 2.0 * bias)
        return true;
    return !cast_ray(scene, a, delta / dist, bias, dist - bias, surface).has_value();
}

double compute_cone_apex_angle(const VoxelGrid& grid, const Aabb& scene_bounds)
{
    const double d = scene_bounds.diagonal();
    if (!(d > 0.0))
        return kPi / 2.0;
    return 2.0 * std::atan(grid.voxel_edge / d);
}

} // namespace pcrl
