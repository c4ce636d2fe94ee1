#pragma once

#include "pcrl/config.hpp"
#include "pcrl/scene_model.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace pcrl {

class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform voxel lattice subdivided into subvoxels (D_v per axis) and primitive cells (D_sv per subvoxel axis).
struct VoxelGrid {
    Vec3 origin = Vec3::Zero();
    double voxel_edge = 1.0; ///< l_v
    Vec3i dims = Vec3i::Ones();
    int voxel_division = 1; ///< D_v
    int subvoxel_division = 1; ///< D_sv

    double voxel_diameter() const { return voxel_edge * std::sqrt(3.0); } ///< l_d
    double subvoxel_edge() const { return voxel_edge / voxel_division; }
    double cell_edge() const { return subvoxel_edge() / subvoxel_division; }
    Vec3i subvoxel_dims() const { return dims * voxel_division; }
    Vec3i cell_dims() const { return dims * (voxel_division * subvoxel_division); }
    std::size_t voxel_count() const
    {
        return static_cast<std::size_t>(dims.x()) * static_cast<std::size_t>(dims.y()) *
               static_cast<std::size_t>(dims.z());
    }
    std::size_t subvoxel_count() const
    {
        const std::size_t d = static_cast<std::size_t>(voxel_division);
        return voxel_count() * d * d * d;
    }

    /// Continuous voxel coordinates; voxel (i,j,k) covers [i,i+1) x [j,j+1) x [k,k+1).
    Vec3 to_voxel(const Vec3& world) const { return (world - origin) / voxel_edge; }
    Vec3 to_world(const Vec3& voxel) const { return origin + voxel * voxel_edge; }
    Vec3i voxel_of(const Vec3& world) const { return floor_index(to_voxel(world)); }
    Vec3i subvoxel_of(const Vec3& world) const { return floor_index((world - origin) / subvoxel_edge()); }
    Vec3i cell_of(const Vec3& world) const { return floor_index((world - origin) / cell_edge()); }

    Vec3 voxel_center(const Vec3i& v) const { return origin + (v.cast<double>().array() + 0.5).matrix() * voxel_edge; }
    Vec3 subvoxel_center(const Vec3i& s) const
    {
        return origin + (s.cast<double>().array() + 0.5).matrix() * subvoxel_edge();
    }
    Aabb cell_box(const Vec3i& c) const
    {
        Aabb box;
        box.min = origin + c.cast<double>() * cell_edge();
        box.max = box.min + Vec3::Constant(cell_edge());
        return box;
    }
    Aabb bounds() const
    {
        Aabb box;
        box.min = origin;
        box.max = origin + dims.cast<double>() * voxel_edge;
        return box;
    }

    bool in_bounds(const Vec3i& v) const
    {
        return (v.array() >= 0).all() && (v.array() < dims.array()).all();
    }
    std::size_t linear(const Vec3i& v) const
    {
        return (static_cast<std::size_t>(v.z()) * static_cast<std::size_t>(dims.y()) +
                static_cast<std::size_t>(v.y())) *
                   static_cast<std::size_t>(dims.x()) +
               static_cast<std::size_t>(v.x());
    }
    Vec3i unlinear(std::size_t index) const
    {
        const auto nx = static_cast<std::size_t>(dims.x());
        const auto ny = static_cast<std::size_t>(dims.y());
        return Vec3i(static_cast<int>(index % nx), static_cast<int>((index / nx) % ny),
                     static_cast<int>(index / (nx * ny)));
    }
    std::size_t subvoxel_linear(const Vec3i& s) const
    {
        const Vec3i sd = subvoxel_dims();
        return (static_cast<std::size_t>(s.z()) * static_cast<std::size_t>(sd.y()) + static_cast<std::size_t>(s.y())) *
                   static_cast<std::size_t>(sd.x()) +
               static_cast<std::size_t>(s.x());
    }

    static Vec3i floor_index(const Vec3& v)
    {
        return Vec3i(static_cast<int>(std::floor(v.x())), static_cast<int>(std::floor(v.y())),
                     static_cast<int>(std::floor(v.z())));
    }
};

/// Grid over `bounds` with a one-voxel margin on every side. Throws CapacityError above cfg.max_voxels.
VoxelGrid build_voxel_grid(const Aabb& bounds, const SimulationConfig& cfg);
VoxelGrid build_voxel_grid(const PointCloud& cloud, const SimulationConfig& cfg);

enum class IeKind : std::uint8_t { PointCloud, DiffractionEdge, Receiver };

struct IntersectableEntity {
    IeKind kind = IeKind::PointCloud;
    Vec3 reception_point = Vec3::Zero();
    std::uint32_t label = 0; ///< surface label (PCIE), edge id (DEIE) or RX id (RXIE)
    Vec3i subvoxel = Vec3i::Zero();

    // PCIE payload: contiguous ranges into VoxelizedScene::points / primitives.
    std::uint32_t point_first = 0;
    std::uint32_t point_count = 0;
    std::uint32_t primitive_first = 0;
    std::uint32_t primitive_count = 0;

    // DEIE payload: edge index and parametric interval [t0, t1] along it (m).
    int edge = -1;
    double t0 = 0.0;
    double t1 = 0.0;

    // RXIE payload: index into VoxelizedScene::receivers.
    int receiver = -1;
};

struct AabbPrimitive {
    Aabb box;
    Vec3i cell = Vec3i::Zero();
    std::uint32_t pcie = 0;
    std::uint32_t point_first = 0;
    std::uint32_t point_count = 0;
};

/// Per-voxel IE index (CSR offsets into the voxel-sorted IE store) and march distances.
class MarchDistanceField {
public:
    static constexpr int kTerminate = -1;

    MarchDistanceField() = default;
    MarchDistanceField(Vec3i dims, std::vector<std::uint32_t> offsets, std::vector<std::uint16_t> distance);

    /// max(1, Chebyshev distance to the nearest IE voxel), or kTerminate outside the grid.
    int march_distance(const Vec3i& v) const;
    bool has_ies(const Vec3i& v) const { return ie_count(v) > 0; }
    std::uint32_t ie_offset(const Vec3i& v) const { return offsets_[linear(v)]; }
    std::uint32_t ie_count(const Vec3i& v) const
    {
        const std::size_t i = linear(v);
        return offsets_[i + 1] - offsets_[i];
    }
    const Vec3i& dims() const { return dims_; }

private:
    std::size_t linear(const Vec3i& v) const
    {
        return (static_cast<std::size_t>(v.z()) * static_cast<std::size_t>(dims_.y()) +
                static_cast<std::size_t>(v.y())) *
                   static_cast<std::size_t>(dims_.x()) +
               static_cast<std::size_t>(v.x());
    }

    Vec3i dims_ = Vec3i::Zero();
    std::vector<std::uint32_t> offsets_; ///< size voxel_count + 1
    std::vector<std::uint16_t> distance_;
};

/// Exact multi-source BFS in the 26-connected (Chebyshev) metric; `occupied` is indexed like VoxelGrid::linear.
/// Throws InputError when no voxel is occupied.
std::vector<std::uint16_t> chebyshev_distance_field(const Vec3i& dims, const std::vector<std::uint8_t>& occupied);

struct VoxelizedScene {
    VoxelGrid grid;
    Aabb bounds; ///< scene bounds (cloud, edges) without the margin
    std::vector<LabeledPoint> points; ///< sorted so each PCIE / primitive owns a contiguous range
    std::vector<DiffractionEdge> edges;
    std::vector<RadioEndpoint> receivers;
    std::vector<IntersectableEntity> ies; ///< sorted by voxel
    std::vector<AabbPrimitive> primitives;
    MarchDistanceField field;
    std::vector<std::int32_t> subvoxel_pcie; ///< subvoxel linear index -> PCIE id, or -1
    std::unordered_map<std::uint64_t, std::uint32_t> cell_primitive; ///< cell key -> primitive id

    std::uint64_t cell_key(const Vec3i& c) const;
    /// Primitive covering cell c, or -1.
    std::int64_t primitive_at(const Vec3i& c) const;
    std::int32_t pcie_at(const Vec3i& subvoxel) const;
    std::size_t pcie_count() const;
};

/// Groups points, edge segments and receivers into IEs, builds AABB primitives and the march-distance field.
VoxelizedScene build_scene(const PointCloud& cloud, const std::vector<DiffractionEdge>& edges,
                           const std::vector<RadioEndpoint>& receivers, const SimulationConfig& cfg,
                           const std::vector<RadioEndpoint>& transmitters = {});

/// Per-axis span rule: an axis whose point span exceeds half the cell edge covers the whole cell.
Aabb primitive_box(const Aabb& tight, const Aabb& cell, double pad = 1e-6);

/// Splits an edge at subvoxel boundary crossings; returns the [t0, t1] pieces in edge parameter (m).
std::vector<std::pair<double, double>> split_edge(const DiffractionEdge& edge, const VoxelGrid& grid);

/// Debug dump: one row per voxel with i,j,k,a_dist,ie_count.
void write_occupancy_csv(const VoxelizedScene& scene, const std::filesystem::path& path);

} // namespace pcrl
