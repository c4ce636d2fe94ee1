#include "pcrl/coarse_tracer.hpp"
#include "pcrl/parallel.hpp"

#include <algorithm>
#include <iostream>

namespace pcrl {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= kFnvPrime;
    }
    return h;
}

std::uint32_t kind_label(const InteractionRecord& r)
{
    return (r.kind == InteractionKind::Diffraction ? 0x80000000u : 0u) | (r.label & 0x7fffffffu);
}

} // namespace

std::uint64_t path_signature(const std::vector<InteractionRecord>& interactions)
{
    std::uint64_t h = fnv_mix(kFnvOffset, interactions.size());
    for (const auto& r : interactions)
        h = fnv_mix(h, kind_label(r));
    return h;
}

bool coarse_path_less(const CoarsePath& a, const CoarsePath& b)
{
    if (a.length != b.length)
        return a.length < b.length;
    return std::lexicographical_compare(
        a.interactions.begin(), a.interactions.end(), b.interactions.begin(), b.interactions.end(),
        [](const InteractionRecord& x, const InteractionRecord& y) { return x.ie < y.ie; });
}

Vec3 reflect_ray(const Vec3& incident, const Vec3& normal)
{
    return incident - 2.0 * incident.dot(normal) * normal;
}

RxHitStore::RxHitStore(int kappa) : kappa_(kappa)
{
    if (kappa < 1)
        throw std::invalid_argument("RxHitStore: kappa must be positive");
}

bool RxHitStore::register_hit(CoarsePath path)
{
    Key key;
    key.reserve(path.interactions.size() + 2);
    key.push_back(static_cast<std::uint32_t>(path.tx));
    key.push_back(static_cast<std::uint32_t>(path.rx));
    std::uint64_t h = kFnvOffset;
    for (const auto& r : path.interactions)
        key.push_back(kind_label(r));
    for (const std::uint32_t k : key)
        h = fnv_mix(h, k);
    path.signature = path_signature(path.interactions);

    Shard& shard = shards_[h % kShards];
    std::lock_guard lock(shard.mutex);
    auto& bucket = shard.buckets[key];
    const auto pos = std::upper_bound(bucket.begin(), bucket.end(), path, coarse_path_less);
    if (bucket.size() >= static_cast<std::size_t>(kappa_)) {
        if (pos == bucket.end())
            return false;
        bucket.pop_back();
    }
    bucket.insert(std::upper_bound(bucket.begin(), bucket.end(), path, coarse_path_less), std::move(path));
    return true;
}

std::vector<std::vector<CoarsePath>> RxHitStore::buckets() const
{
    std::vector<std::pair<Key, const std::vector<CoarsePath>*>> all;
    std::vector<std::unique_lock<std::mutex>> locks;
    for (const auto& shard : shards_) {
        locks.emplace_back(shard.mutex);
        for (const auto& [key, bucket] : shard.buckets)
            all.emplace_back(key, &bucket);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::vector<CoarsePath>> out;
    out.reserve(all.size());
    for (const auto& [key, bucket] : all)
        out.push_back(*bucket);
    return out;
}

std::vector<CoarsePath> RxHitStore::paths() const
{
    std::vector<CoarsePath> out;
    for (auto& bucket : buckets())
        for (auto& p : bucket)
            out.push_back(std::move(p));
    return out;
}

bool register_rx_hit(const CoarsePath& path, RxHitStore& store)
{
    return store.register_hit(path);
}

DiffractionFans build_diffraction_fans(const VoxelizedScene& scene, const SimulationConfig& cfg, double apex_angle)
{
    DiffractionFans fans;
    fans.cone_half_angle = 0.5 * std::max(apex_angle, deg_to_rad(cfg.diffraction_step_deg));
    fans.by_edge.resize(scene.edges.size());
    for (std::size_t e = 0; e < scene.edges.size(); ++e) {
        const int base = static_cast<int>(precompute_edge_fan(scene.edges[e], cfg.diffraction_step_deg).rays.size());
        for (int count = 1; count <= base; ++count)
            fans.by_edge[e].push_back(make_edge_fan(scene.edges[e], count));
    }
    return fans;
}

std::vector<PropagationNode> transmission_phase(const RadioEndpoint& tx, int tx_index, const VoxelizedScene& scene,
                                                const SimulationConfig& cfg, RxHitStore& store)
{
    const SurfaceParams surface = cfg.coarse_surface();
    const double bias = cfg.coarse_bias();
    std::vector<std::optional<PropagationNode>> slots(scene.ies.size());

    parallel_for(scene.ies.size(), [&](std::size_t k) {
        const IntersectableEntity& ie = scene.ies[k];
        if (ie.kind == IeKind::PointCloud && cfg.max_interactions < 1)
            return;
        if (ie.kind == IeKind::DiffractionEdge && (cfg.max_interactions < 1 || cfg.max_diffractions < 1))
            return;
        const Visibility vis = trace_visibility(scene, tx.position, ie, static_cast<std::int64_t>(k), bias, surface);
        if (!vis.visible)
            return;
        if (ie.kind == IeKind::Receiver) {
            CoarsePath path;
            path.tx = tx_index;
            path.rx = ie.receiver;
            path.length = (ie.reception_point - tx.position).norm();
            store.register_hit(std::move(path));
            return;
        }
        PropagationNode node;
        node.tx = tx_index;
        node.record.ie = static_cast<std::uint32_t>(k);
        if (ie.kind == IeKind::PointCloud) {
            node.record.kind = InteractionKind::Reflection;
            node.record.position = vis.hit->point;
            node.record.normal = vis.hit->normal;
            node.record.label = vis.hit->label;
        } else {
            node.record.kind = InteractionKind::Diffraction;
            node.record.position = ie.reception_point;
            node.record.edge = ie.edge;
            node.record.t = 0.5 * (ie.t0 + ie.t1);
            node.record.label = ie.label;
            node.diffractions = 1;
        }
        const Vec3 delta = node.record.position - tx.position;
        node.length = delta.norm();
        node.incoming = delta / node.length;
        slots[k] = node;
    });

    std::vector<PropagationNode> seeds;
    for (auto& s : slots)
        if (s)
            seeds.push_back(*s);
    return seeds;
}

namespace {

std::vector<InteractionRecord> chain_of(const std::vector<std::vector<PropagationNode>>& depths, std::size_t depth,
                                        std::size_t index)
{
    std::vector<InteractionRecord> chain(depth + 1);
    std::int64_t at = static_cast<std::int64_t>(index);
    for (std::size_t d = depth + 1; d-- > 0;) {
        const PropagationNode& n = depths[d][static_cast<std::size_t>(at)];
        chain[d] = n.record;
        at = n.parent;
    }
    return chain;
}

} // namespace

CoarseTraceResult propagation_phase(std::vector<PropagationNode> seeds, const std::vector<RadioEndpoint>& txs,
                                    const VoxelizedScene& scene, const SimulationConfig& cfg, RxHitStore& store)
{
    (void)txs;
    CoarseTraceResult result;
    const double apex = compute_cone_apex_angle(scene.grid, scene.bounds);
    result.cone_half_angle = 0.5 * apex;
    const DiffractionFans fans = build_diffraction_fans(scene, cfg, apex);
    const SurfaceParams surface = cfg.coarse_surface();
    const double bias = cfg.coarse_bias();

    std::vector<std::vector<PropagationNode>> depths;
    if (seeds.size() > cfg.max_in_flight) {
        result.truncated += seeds.size() - cfg.max_in_flight;
        seeds.resize(cfg.max_in_flight);
    }
    depths.push_back(std::move(seeds));

    while (!depths.back().empty()) {
        const std::size_t depth = depths.size() - 1;
        const auto& level = depths.back();
        result.nodes_per_depth.push_back(level.size());
        std::vector<std::vector<PropagationNode>> children(level.size());

        parallel_for(level.size(), [&](std::size_t i) {
            thread_local TraversalScratch scratch;
            const PropagationNode& node = level[i];
            const Vec3 origin = node.record.position;

            std::vector<ConeRay> cones;
            if (node.record.kind == InteractionKind::Reflection) {
                ConeRay cone = ConeRay::reflection(origin, reflect_ray(node.incoming, node.record.normal).normalized(),
                                                   result.cone_half_angle);
                cones.push_back(cone);
            } else {
                const auto edge_index = static_cast<std::size_t>(node.record.edge);
                const DiffractionEdge& edge = scene.edges[edge_index];
                const auto& edge_fans = fans.by_edge[edge_index];
                if (edge_fans.empty())
                    return;
                const double theta = std::acos(std::clamp(node.incoming.dot(edge.direction), -1.0, 1.0));
                const int count = std::min<int>(optimal_ray_count(static_cast<int>(edge_fans.size()), theta),
                                                static_cast<int>(edge_fans.size()));
                const auto launch = lift_to_keller_cone(edge_fans[static_cast<std::size_t>(count - 1)], edge, node.incoming);
                if (!launch)
                    return;
                for (const auto& ray : launch->rays) {
                    ConeRay cone;
                    cone.origin = origin;
                    cone.direction = ray.direction;
                    cone.half_angle = fans.cone_half_angle;
                    cone.sep_normals = ray.sep_normals;
                    cones.push_back(cone);
                }
            }

            std::vector<std::uint32_t> candidates;
            for (auto& cone : cones) {
                cone.interaction_count = node.interactions;
                cone.diffraction_count = node.diffractions;
                cone.source_ie = node.record.ie;
                const auto found = trace_cone(cone, scene, &scratch);
                candidates.insert(candidates.end(), found.begin(), found.end());
            }
            std::sort(candidates.begin(), candidates.end());
            candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

            const bool can_interact = node.interactions < cfg.max_interactions;
            const bool can_diffract = can_interact && node.diffractions < cfg.max_diffractions;
            for (const std::uint32_t c : candidates) {
                const IntersectableEntity& ie = scene.ies[c];
                if (ie.kind == IeKind::PointCloud && !can_interact)
                    continue;
                if (ie.kind == IeKind::DiffractionEdge &&
                    (!can_diffract || (node.record.kind == InteractionKind::Diffraction && ie.edge == node.record.edge)))
                    continue;
                const Visibility vis = trace_visibility(scene, origin, ie, c, bias, surface);
                if (!vis.visible)
                    continue;
                if (ie.kind == IeKind::Receiver) {
                    CoarsePath path;
                    path.tx = node.tx;
                    path.rx = ie.receiver;
                    path.interactions = chain_of(depths, depth, i);
                    path.length = node.length + (ie.reception_point - origin).norm();
                    store.register_hit(std::move(path));
                    continue;
                }
                PropagationNode child;
                child.parent = static_cast<std::int64_t>(i);
                child.tx = node.tx;
                child.interactions = node.interactions + 1;
                child.diffractions = node.diffractions;
                child.record.ie = c;
                if (ie.kind == IeKind::PointCloud) {
                    child.record.kind = InteractionKind::Reflection;
                    child.record.position = vis.hit->point;
                    child.record.normal = vis.hit->normal;
                    child.record.label = vis.hit->label;
                } else {
                    child.record.kind = InteractionKind::Diffraction;
                    child.record.position = ie.reception_point;
                    child.record.edge = ie.edge;
                    child.record.t = 0.5 * (ie.t0 + ie.t1);
                    child.record.label = ie.label;
                    ++child.diffractions;
                }
                const Vec3 delta = child.record.position - origin;
                const double seg = delta.norm();
                if (!(seg > 0.0))
                    continue;
                child.length = node.length + seg;
                child.incoming = delta / seg;
                children[i].push_back(child);
            }
        });

        std::vector<PropagationNode> next;
        std::size_t total = 0;
        for (const auto& c : children)
            total += c.size();
        next.reserve(std::min<std::size_t>(total, cfg.max_in_flight));
        for (auto& c : children)
            for (auto& n : c) {
                if (next.size() >= cfg.max_in_flight) {
                    ++result.truncated;
                    continue;
                }
                next.push_back(std::move(n));
            }
        if (total > next.size())
            std::cerr << "warning: in-flight cap reached at depth " << depth + 2 << ": kept " << next.size() << " of "
                      << total << " partial paths\n";
        depths.push_back(std::move(next));
    }
    return result;
}

CoarseTraceResult trace_coarse_paths(const VoxelizedScene& scene, const std::vector<RadioEndpoint>& txs,
                                     const SimulationConfig& cfg)
{
    RxHitStore store(cfg.kappa);
    std::vector<PropagationNode> seeds;
    for (std::size_t t = 0; t < txs.size(); ++t) {
        auto s = transmission_phase(txs[t], static_cast<int>(t), scene, cfg, store);
        seeds.insert(seeds.end(), s.begin(), s.end());
    }
    CoarseTraceResult result = propagation_phase(std::move(seeds), txs, scene, cfg, store);
    result.paths = store.paths();
    for (const auto& p : result.paths) {
        if (result.paths_per_depth.size() <= p.interactions.size())
            result.paths_per_depth.resize(p.interactions.size() + 1, 0);
        ++result.paths_per_depth[p.interactions.size()];
    }
    return result;
}

nlohmann::json coarse_paths_to_json(const std::vector<CoarsePath>& paths, const VoxelizedScene& scene,
                                    const std::vector<RadioEndpoint>& txs)
{
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : paths) {
        nlohmann::json j;
        j["tx"] = txs[static_cast<std::size_t>(p.tx)].id;
        j["rx"] = scene.receivers[static_cast<std::size_t>(p.rx)].id;
        j["length"] = p.length;
        j["signature"] = p.signature;
        nlohmann::json inter = nlohmann::json::array();
        for (const auto& r : p.interactions) {
            nlohmann::json jr;
            jr["kind"] = r.kind == InteractionKind::Reflection ? "R" : "D";
            jr["label"] = r.label;
            jr["ie"] = r.ie;
            jr["position"] = {r.position.x(), r.position.y(), r.position.z()};
            if (r.kind == InteractionKind::Reflection)
                jr["normal"] = {r.normal.x(), r.normal.y(), r.normal.z()};
            else {
                jr["edge"] = scene.edges[static_cast<std::size_t>(r.edge)].id;
                jr["t"] = r.t;
            }
            inter.push_back(jr);
        }
        j["interactions"] = inter;
        out.push_back(j);
    }
    return out;
}

} // namespace pcrl
