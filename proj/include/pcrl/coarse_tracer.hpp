#pragma once

#include "pcrl/config.hpp"
#include "pcrl/diffraction_geometry.hpp"
#include "pcrl/traversal.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <mutex>
#include <vector>

namespace pcrl {

enum class InteractionKind : std::uint8_t { Reflection, Diffraction };

struct InteractionRecord {
    InteractionKind kind = InteractionKind::Reflection;
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ(); ///< surface normal (reflection)
    int edge = -1; ///< index into VoxelizedScene::edges (diffraction)
    double t = 0.0; ///< edge parameter in [0, length] (diffraction)
    std::uint32_t label = 0;
    std::uint32_t ie = 0; ///< IE the interaction was found through
};

struct CoarsePath {
    int tx = 0; ///< transmitter index
    int rx = 0; ///< receiver index
    std::vector<InteractionRecord> interactions;
    double length = 0.0;
    std::uint64_t signature = 0;
};

/// Hash of the (kind, label) sequence.
std::uint64_t path_signature(const std::vector<InteractionRecord>& interactions);

/// Total order used for the kappa buckets: length, then the IE id sequence.
bool coarse_path_less(const CoarsePath& a, const CoarsePath& b);

/// d - 2 (d . n) n.
Vec3 reflect_ray(const Vec3& incident, const Vec3& normal);

/// Kappa-shortest buckets keyed by (tx, rx, kind/label sequence). Safe for concurrent inserts.
class RxHitStore {
public:
    explicit RxHitStore(int kappa);

    /// Inserts when the bucket has room or the path precedes the bucket's current worst entry.
    bool register_hit(CoarsePath path);

    /// All kept paths in deterministic order (tx, rx, bucket key, then coarse_path_less).
    std::vector<CoarsePath> paths() const;
    std::vector<std::vector<CoarsePath>> buckets() const;
    int kappa() const { return kappa_; }

private:
    using Key = std::vector<std::uint32_t>;
    static constexpr std::size_t kShards = 64;
    struct Shard {
        mutable std::mutex mutex;
        std::map<Key, std::vector<CoarsePath>> buckets;
    };

    int kappa_;
    std::array<Shard, kShards> shards_;
};

bool register_rx_hit(const CoarsePath& path, RxHitStore& store);

/// Partial path awaiting propagation; `parent` indexes the previous depth (-1 for seeds).
struct PropagationNode {
    std::int64_t parent = -1;
    int tx = 0;
    InteractionRecord record;
    Vec3 incoming = Vec3::UnitX(); ///< direction of the ray arriving at the interaction
    double length = 0.0; ///< path length from TX to this interaction
    int interactions = 1;
    int diffractions = 0;
};

struct CoarseTraceResult {
    std::vector<CoarsePath> paths;
    std::vector<std::size_t> nodes_per_depth; ///< index d: partial paths with d + 1 interactions
    std::vector<std::size_t> paths_per_depth; ///< index d: accepted RX hits with d interactions
    std::size_t truncated = 0; ///< partial paths dropped by the in-flight cap
    double cone_half_angle = 0.0;
};

/// Per-edge fans for every ray count up to the base count.
struct DiffractionFans {
    std::vector<std::vector<EdgeFan2D>> by_edge; ///< [edge][count - 1]
    double cone_half_angle = 0.0;
};
DiffractionFans build_diffraction_fans(const VoxelizedScene& scene, const SimulationConfig& cfg, double apex_angle);

/// Visibility rays from the transmitter to every IE reception point. Visible PCIEs and DEIEs
/// become seeds, visible receivers are registered as line-of-sight paths.
std::vector<PropagationNode> transmission_phase(const RadioEndpoint& tx, int tx_index, const VoxelizedScene& scene,
                                                const SimulationConfig& cfg, RxHitStore& store);

/// Depth-by-depth cone tracing from the seeds until no candidates remain or the caps are reached.
CoarseTraceResult propagation_phase(std::vector<PropagationNode> seeds, const std::vector<RadioEndpoint>& txs,
                                    const VoxelizedScene& scene, const SimulationConfig& cfg, RxHitStore& store);

/// Transmission and propagation for every transmitter.
CoarseTraceResult trace_coarse_paths(const VoxelizedScene& scene, const std::vector<RadioEndpoint>& txs,
                                     const SimulationConfig& cfg);

nlohmann::json coarse_paths_to_json(const std::vector<CoarsePath>& paths, const VoxelizedScene& scene,
                                    const std::vector<RadioEndpoint>& txs);

} // namespace pcrl
