#include "pcrl/postprocess.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace pcrl {

double fresnel_radius(double s1, double s2, double wavelength)
{
    if (!(s1 > 0.0) || !(s2 > 0.0) || !(wavelength > 0.0))
        throw std::invalid_argument("fresnel_radius: distances and wavelength must be positive");
    return std::sqrt(wavelength * s1 * s2 / (s1 + s2));
}

std::uint32_t resolve_exact_label(const Vec3& point, const VoxelizedScene& scene, double radius, std::uint32_t fallback)
{
    const Vec3i center = scene.grid.cell_of(point);
    const int reach = std::max(1, static_cast<int>(std::ceil(radius / scene.grid.cell_edge())));
    double best = radius * radius;
    std::optional<std::uint32_t> label;
    for (int dz = -reach; dz <= reach; ++dz)
        for (int dy = -reach; dy <= reach; ++dy)
            for (int dx = -reach; dx <= reach; ++dx) {
                const std::int64_t id = scene.primitive_at(center + Vec3i(dx, dy, dz));
                if (id < 0)
                    continue;
                const AabbPrimitive& prim = scene.primitives[static_cast<std::size_t>(id)];
                for (std::uint32_t k = 0; k < prim.point_count; ++k) {
                    const LabeledPoint& p = scene.points[prim.point_first + k];
                    const double d2 = (p.position - point).squaredNorm();
                    if (d2 <= best) {
                        // Equal distances resolve to the smaller label for determinism.
                        if (d2 < best || !label || p.label < *label)
                            label = p.label;
                        best = d2;
                    }
                }
            }
    if (label)
        return *label;
    const std::int32_t pcie = scene.pcie_at(scene.grid.subvoxel_of(point));
    return pcie >= 0 ? scene.ies[static_cast<std::size_t>(pcie)].label : fallback;
}

std::uint64_t refined_signature(const RefinedPath& path)
{
    std::vector<InteractionRecord> records(path.interactions.size());
    for (std::size_t k = 0; k < records.size(); ++k) {
        records[k].kind = path.interactions[k].kind;
        records[k].label = path.interactions[k].label;
    }
    return path_signature(records);
}

namespace {

using ChainKey = std::tuple<int, int, std::vector<std::uint32_t>>;

ChainKey chain_key(const RefinedPath& p)
{
    std::vector<std::uint32_t> chain;
    for (const auto& i : p.interactions)
        chain.push_back((i.kind == InteractionKind::Diffraction ? 0x80000000u : 0u) | (i.label & 0x7fffffffu));
    return {p.tx, p.rx, std::move(chain)};
}

bool positions_less(const RefinedPath& a, const RefinedPath& b)
{
    const auto pa = a.points();
    const auto pb = b.points();
    return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end(), [](const Vec3& x, const Vec3& y) {
        return std::lexicographical_compare(x.data(), x.data() + 3, y.data(), y.data() + 3);
    });
}

bool delay_order(const RefinedPath& a, const RefinedPath& b)
{
    if (a.delay != b.delay)
        return a.delay < b.delay;
    const std::uint64_t sa = refined_signature(a);
    const std::uint64_t sb = refined_signature(b);
    if (sa != sb)
        return sa < sb;
    if (a.tx != b.tx || a.rx != b.rx)
        return std::tie(a.tx, a.rx) < std::tie(b.tx, b.rx);
    return positions_less(a, b);
}

} // namespace

bool is_duplicate(const RefinedPath& candidate, const RefinedPath& accepted, const FresnelCheckContext& ctx)
{
    if (candidate.tx != accepted.tx || candidate.rx != accepted.rx ||
        candidate.interactions.size() != accepted.interactions.size())
        return false;
    for (std::size_t k = 0; k < candidate.interactions.size(); ++k)
        if (candidate.interactions[k].kind != accepted.interactions[k].kind)
            return false;

    const auto pc = candidate.points();
    const auto pa = accepted.points();
    for (std::size_t k = 1; k + 1 < pa.size(); ++k) {
        const double s1 = (pa[k] - pa[k - 1]).norm();
        const double s2 = (pa[k + 1] - pa[k]).norm();
        if (!(s1 > 0.0) || !(s2 > 0.0))
            return false;
        if ((pc[k] - pa[k]).norm() > fresnel_radius(s1, s2, ctx.wavelength))
            return false;
    }
    const double max_angle = deg_to_rad(ctx.ray_match_angle_deg);
    for (std::size_t k = 0; k + 1 < pa.size(); ++k)
        if (!(angle_between(pc[k + 1] - pc[k], pa[k + 1] - pa[k]) < max_angle))
            return false;
    return true;
}

std::vector<RefinedPath> dedupe_refined(std::vector<RefinedPath> paths, const FresnelCheckContext& ctx)
{
    // Stage 1: shortest per (tx, rx, kind/label chain).
    std::map<ChainKey, RefinedPath> shortest;
    for (auto& p : paths) {
        auto key = chain_key(p);
        auto it = shortest.find(key);
        if (it == shortest.end())
            shortest.emplace(std::move(key), std::move(p));
        else if (p.length < it->second.length || (p.length == it->second.length && positions_less(p, it->second)))
            it->second = std::move(p);
    }

    std::vector<RefinedPath> ordered;
    ordered.reserve(shortest.size());
    for (auto& [key, p] : shortest)
        ordered.push_back(std::move(p));
    std::sort(ordered.begin(), ordered.end(), delay_order);

    // Stage 2: greedy acceptance in delay order.
    std::vector<RefinedPath> kept;
    for (auto& p : ordered) {
        const bool dup = std::any_of(kept.begin(), kept.end(),
                                     [&](const RefinedPath& acc) { return is_duplicate(p, acc, ctx); });
        if (!dup)
            kept.push_back(std::move(p));
    }
    return kept;
}

} // namespace pcrl
