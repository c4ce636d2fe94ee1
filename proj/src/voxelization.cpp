#include "pcrl/voxelization.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <tuple>

namespace pcrl {

VoxelGrid build_voxel_grid(const Aabb& bounds, const SimulationConfig& cfg)
{
    if (!(cfg.voxel_size > 0.0))
        throw ConfigError("voxel_size must be positive");
    if (bounds.empty())
        throw InputError("cannot build a voxel grid over empty bounds");

    VoxelGrid grid;
    grid.voxel_edge = cfg.voxel_size;
    grid.voxel_division = cfg.voxel_division;
    grid.subvoxel_division = cfg.subvoxel_division;
    grid.origin = bounds.min - Vec3::Constant(cfg.voxel_size);

    const Vec3 extent = bounds.extent();
    std::uint64_t total = 1;
    for (int a = 0; a < 3; ++a) {
        const double cells = std::ceil(extent[a] / cfg.voxel_size);
        if (!std::isfinite(cells) || cells > 1e9)
            throw CapacityError("voxel grid axis too large");
        const auto n = std::max<std::int64_t>(1, static_cast<std::int64_t>(cells)) + 2;
        grid.dims[a] = static_cast<int>(n);
        total *= static_cast<std::uint64_t>(n);
    }
    if (total > cfg.max_voxels)
        throw CapacityError("voxel grid needs " + std::to_string(total) + " voxels, cap is " +
                            std::to_string(cfg.max_voxels));
    return grid;
}

VoxelGrid build_voxel_grid(const PointCloud& cloud, const SimulationConfig& cfg)
{
    return build_voxel_grid(cloud.bounds(), cfg);
}

MarchDistanceField::MarchDistanceField(Vec3i dims, std::vector<std::uint32_t> offsets,
                                       std::vector<std::uint16_t> distance)
    : dims_(std::move(dims)), offsets_(std::move(offsets)), distance_(std::move(distance))
{
}

int MarchDistanceField::march_distance(const Vec3i& v) const
{
    if ((v.array() < 0).any() || (v.array() >= dims_.array()).any())
        return kTerminate;
    return std::max<int>(1, distance_[linear(v)]);
}

std::vector<std::uint16_t> chebyshev_distance_field(const Vec3i& dims, const std::vector<std::uint8_t>& occupied)
{
    const std::size_t nx = static_cast<std::size_t>(dims.x());
    const std::size_t ny = static_cast<std::size_t>(dims.y());
    const std::size_t nz = static_cast<std::size_t>(dims.z());
    const std::size_t n = nx * ny * nz;
    if (occupied.size() != n)
        throw std::invalid_argument("chebyshev_distance_field: occupancy size mismatch");

    constexpr std::uint16_t kUnset = std::numeric_limits<std::uint16_t>::max();
    std::vector<std::uint16_t> dist(n, kUnset);
    std::vector<std::size_t> frontier;
    for (std::size_t i = 0; i < n; ++i)
        if (occupied[i]) {
            dist[i] = 0;
            frontier.push_back(i);
        }
    if (frontier.empty())
        throw InputError("scene has no intersectable entities");

    // Level-synchronous BFS; one 26-connected step raises the Chebyshev distance by exactly one.
    std::vector<std::size_t> next;
    for (std::uint16_t level = 1; !frontier.empty(); ++level) {
        next.clear();
        for (const std::size_t i : frontier) {
            const auto x = static_cast<std::int64_t>(i % nx);
            const auto y = static_cast<std::int64_t>((i / nx) % ny);
            const auto z = static_cast<std::int64_t>(i / (nx * ny));
            for (std::int64_t dz = -1; dz <= 1; ++dz)
                for (std::int64_t dy = -1; dy <= 1; ++dy)
                    for (std::int64_t dx = -1; dx <= 1; ++dx) {
                        const std::int64_t qx = x + dx, qy = y + dy, qz = z + dz;
                        if (qx < 0 || qy < 0 || qz < 0 || qx >= static_cast<std::int64_t>(nx) ||
                            qy >= static_cast<std::int64_t>(ny) || qz >= static_cast<std::int64_t>(nz))
                            continue;
                        const std::size_t q = (static_cast<std::size_t>(qz) * ny + static_cast<std::size_t>(qy)) * nx +
                                              static_cast<std::size_t>(qx);
                        if (dist[q] != kUnset)
                            continue;
                        dist[q] = level;
                        next.push_back(q);
                    }
        }
        frontier.swap(next);
        if (level == kUnset - 1)
            break;
    }
    return dist;
}

Aabb primitive_box(const Aabb& tight, const Aabb& cell, double pad)
{
    Aabb box = tight;
    const Vec3 cell_extent = cell.extent();
    for (int a = 0; a < 3; ++a)
        if (tight.max[a] - tight.min[a] > 0.5 * cell_extent[a]) {
            box.min[a] = cell.min[a];
            box.max[a] = cell.max[a];
        }
    box.min.array() -= pad;
    box.max.array() += pad;
    return box;
}

std::vector<std::pair<double, double>> split_edge(const DiffractionEdge& edge, const VoxelGrid& grid)
{
    const double length = edge.length();
    const double h = grid.subvoxel_edge();
    std::vector<double> cuts = {0.0, length};
    for (int a = 0; a < 3; ++a) {
        const double d = edge.direction[a];
        if (std::abs(d) < 1e-12)
            continue;
        const double s0 = (edge.start[a] - grid.origin[a]) / h;
        const double s1 = (edge.end[a] - grid.origin[a]) / h;
        const auto lo = static_cast<std::int64_t>(std::ceil(std::min(s0, s1)));
        const auto hi = static_cast<std::int64_t>(std::floor(std::max(s0, s1)));
        for (std::int64_t k = lo; k <= hi; ++k) {
            const double t = (grid.origin[a] + static_cast<double>(k) * h - edge.start[a]) / d;
            if (t > 0.0 && t < length)
                cuts.push_back(t);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<std::pair<double, double>> pieces;
    double prev = cuts.front();
    for (std::size_t i = 1; i < cuts.size(); ++i) {
        if (cuts[i] - prev <= 1e-9 * std::max(1.0, length))
            continue;
        pieces.emplace_back(prev, cuts[i]);
        prev = cuts[i];
    }
    if (pieces.empty())
        pieces.emplace_back(0.0, length);
    else
        pieces.back().second = length;
    return pieces;
}

std::uint64_t VoxelizedScene::cell_key(const Vec3i& c) const
{
    const Vec3i cd = grid.cell_dims();
    return (static_cast<std::uint64_t>(c.z()) * static_cast<std::uint64_t>(cd.y()) + static_cast<std::uint64_t>(c.y())) *
               static_cast<std::uint64_t>(cd.x()) +
           static_cast<std::uint64_t>(c.x());
}

std::int64_t VoxelizedScene::primitive_at(const Vec3i& c) const
{
    const Vec3i cd = grid.cell_dims();
    if ((c.array() < 0).any() || (c.array() >= cd.array()).any())
        return -1;
    const auto it = cell_primitive.find(cell_key(c));
    return it == cell_primitive.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::int32_t VoxelizedScene::pcie_at(const Vec3i& s) const
{
    const Vec3i sd = grid.subvoxel_dims();
    if ((s.array() < 0).any() || (s.array() >= sd.array()).any())
        return -1;
    return subvoxel_pcie[grid.subvoxel_linear(s)];
}

std::size_t VoxelizedScene::pcie_count() const
{
    return static_cast<std::size_t>(
        std::count_if(ies.begin(), ies.end(), [](const IntersectableEntity& ie) { return ie.kind == IeKind::PointCloud; }));
}

namespace {

Vec3i clamp_index(const Vec3i& v, const Vec3i& dims)
{
    return v.cwiseMax(Vec3i::Zero()).cwiseMin(dims - Vec3i::Ones());
}

} // namespace

VoxelizedScene build_scene(const PointCloud& cloud, const std::vector<DiffractionEdge>& edges,
                           const std::vector<RadioEndpoint>& receivers, const SimulationConfig& cfg,
                           const std::vector<RadioEndpoint>& transmitters)
{
    cfg.validate();
    VoxelizedScene scene;
    scene.edges = edges;
    scene.receivers = receivers;

    Aabb bounds = cloud.bounds();
    for (const auto& e : edges) {
        bounds.expand(e.start);
        bounds.expand(e.end);
    }
    if (bounds.empty())
        for (const auto& rx : receivers)
            bounds.expand(rx.position);
    scene.bounds = bounds;

    Aabb grid_bounds = bounds;
    for (const auto* list : {&receivers, &transmitters})
        for (const auto& ep : *list)
            grid_bounds.expand(ep.position);
    scene.grid = build_voxel_grid(grid_bounds, cfg);
    const VoxelGrid& grid = scene.grid;
    const int dv = grid.voxel_division;
    const int dsv = grid.subvoxel_division;
    const Vec3i cell_dims = grid.cell_dims();

    // Sort points by (voxel, subvoxel within voxel, cell within subvoxel).
    struct Keyed {
        std::uint64_t voxel;
        std::uint32_t sub;
        std::uint32_t cell;
        std::uint32_t index;
        Vec3i cell_index;
    };
    const auto& src = cloud.points();
    std::vector<Keyed> keyed(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        const Vec3i c = clamp_index(grid.cell_of(src[i].position), cell_dims);
        const Vec3i s(c.x() / dsv, c.y() / dsv, c.z() / dsv);
        const Vec3i v(s.x() / dv, s.y() / dv, s.z() / dv);
        const Vec3i sl = s - v * dv;
        const Vec3i cl = c - s * dsv;
        keyed[i] = {grid.linear(v), static_cast<std::uint32_t>((sl.z() * dv + sl.y()) * dv + sl.x()),
                    static_cast<std::uint32_t>((cl.z() * dsv + cl.y()) * dsv + cl.x()), static_cast<std::uint32_t>(i),
                    c};
    }
    std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        return std::tie(a.voxel, a.sub, a.cell, a.index) < std::tie(b.voxel, b.sub, b.cell, b.index);
    });
    scene.points.resize(src.size());
    for (std::size_t i = 0; i < keyed.size(); ++i)
        scene.points[i] = src[keyed[i].index];

    struct Pending {
        std::uint64_t voxel;
        IntersectableEntity ie;
    };
    std::vector<Pending> pending;

    // PCIEs and their primitives.
    std::size_t i = 0;
    while (i < keyed.size()) {
        std::size_t j = i;
        while (j < keyed.size() && keyed[j].voxel == keyed[i].voxel && keyed[j].sub == keyed[i].sub)
            ++j;
        IntersectableEntity ie;
        ie.kind = IeKind::PointCloud;
        const Vec3i c0 = keyed[i].cell_index;
        ie.subvoxel = Vec3i(c0.x() / dsv, c0.y() / dsv, c0.z() / dsv);
        ie.point_first = static_cast<std::uint32_t>(i);
        ie.point_count = static_cast<std::uint32_t>(j - i);
        ie.primitive_first = static_cast<std::uint32_t>(scene.primitives.size());

        const Vec3 center = grid.subvoxel_center(ie.subvoxel);
        Vec3 sum = Vec3::Zero();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = i; k < j; ++k) {
            const LabeledPoint& p = scene.points[k];
            sum += p.position;
            const double d2 = (p.position - center).squaredNorm();
            if (d2 < best) {
                best = d2;
                ie.label = p.label;
            }
        }
        ie.reception_point = sum / static_cast<double>(j - i);

        std::size_t k = i;
        while (k < j) {
            std::size_t m = k;
            Aabb tight;
            while (m < j && keyed[m].cell == keyed[k].cell) {
                tight.expand(scene.points[m].position);
                ++m;
            }
            AabbPrimitive prim;
            prim.cell = keyed[k].cell_index;
            prim.box = primitive_box(tight, grid.cell_box(prim.cell));
            prim.pcie = static_cast<std::uint32_t>(pending.size()); // provisional, remapped below
            prim.point_first = static_cast<std::uint32_t>(k);
            prim.point_count = static_cast<std::uint32_t>(m - k);
            scene.primitives.push_back(prim);
            k = m;
        }
        ie.primitive_count = static_cast<std::uint32_t>(scene.primitives.size()) - ie.primitive_first;
        pending.push_back({keyed[i].voxel, ie});
        i = j;
    }

    // DEIEs: one per crossed subvoxel.
    const Vec3i sub_dims = grid.subvoxel_dims();
    for (std::size_t e = 0; e < edges.size(); ++e) {
        for (const auto& [t0, t1] : split_edge(edges[e], grid)) {
            IntersectableEntity ie;
            ie.kind = IeKind::DiffractionEdge;
            ie.edge = static_cast<int>(e);
            ie.t0 = t0;
            ie.t1 = t1;
            ie.reception_point = edges[e].point_at(0.5 * (t0 + t1));
            ie.label = static_cast<std::uint32_t>(edges[e].id);
            ie.subvoxel = clamp_index(grid.subvoxel_of(ie.reception_point), sub_dims);
            const Vec3i v(ie.subvoxel.x() / dv, ie.subvoxel.y() / dv, ie.subvoxel.z() / dv);
            pending.push_back({grid.linear(v), ie});
        }
    }

    for (std::size_t r = 0; r < receivers.size(); ++r) {
        IntersectableEntity ie;
        ie.kind = IeKind::Receiver;
        ie.receiver = static_cast<int>(r);
        ie.reception_point = receivers[r].position;
        ie.label = static_cast<std::uint32_t>(receivers[r].id);
        ie.subvoxel = clamp_index(grid.subvoxel_of(ie.reception_point), sub_dims);
        const Vec3i v(ie.subvoxel.x() / dv, ie.subvoxel.y() / dv, ie.subvoxel.z() / dv);
        pending.push_back({grid.linear(v), ie});
    }

    std::vector<std::uint32_t> order(pending.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return pending[a].voxel < pending[b].voxel; });
    std::vector<std::uint32_t> final_index(pending.size());
    scene.ies.reserve(pending.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        final_index[order[k]] = static_cast<std::uint32_t>(k);
        scene.ies.push_back(pending[order[k]].ie);
    }
    for (auto& prim : scene.primitives)
        prim.pcie = final_index[prim.pcie];

    scene.subvoxel_pcie.assign(grid.subvoxel_count(), -1);
    for (std::size_t k = 0; k < scene.ies.size(); ++k)
        if (scene.ies[k].kind == IeKind::PointCloud)
            scene.subvoxel_pcie[grid.subvoxel_linear(scene.ies[k].subvoxel)] = static_cast<std::int32_t>(k);
    scene.cell_primitive.reserve(scene.primitives.size());
    for (std::size_t k = 0; k < scene.primitives.size(); ++k)
        scene.cell_primitive.emplace(scene.cell_key(scene.primitives[k].cell), static_cast<std::uint32_t>(k));

    const std::size_t nvox = grid.voxel_count();
    std::vector<std::uint32_t> offsets(nvox + 1, 0);
    std::vector<std::uint8_t> occupied(nvox, 0);
    for (const auto& p : pending) {
        ++offsets[p.voxel + 1];
        occupied[p.voxel] = 1;
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    scene.field = MarchDistanceField(grid.dims, std::move(offsets), chebyshev_distance_field(grid.dims, occupied));
    return scene;
}

void write_occupancy_csv(const VoxelizedScene& scene, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write " + path.string());
    out << "i,j,k,a_dist,ie_count\n";
    const Vec3i d = scene.grid.dims;
    for (int z = 0; z < d.z(); ++z)
        for (int y = 0; y < d.y(); ++y)
            for (int x = 0; x < d.x(); ++x) {
                const Vec3i v(x, y, z);
                out << x << ',' << y << ',' << z << ',' << scene.field.march_distance(v) << ','
                    << scene.field.ie_count(v) << '\n';
            }
}

} // namespace pcrl
