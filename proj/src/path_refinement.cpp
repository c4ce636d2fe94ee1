#include "pcrl/path_refinement.hpp"
#include "pcrl/parallel.hpp"

namespace pcrl {

const char* to_string(RefineStatus status)
{
    switch (status) {
    case RefineStatus::Converged:
        return "converged";
    case RefineStatus::NotConverged:
        return "not_converged";
    case RefineStatus::Degenerate:
        return "degenerate";
    case RefineStatus::SurfaceMiss:
        return "surface_miss";
    case RefineStatus::OffEdge:
        return "off_edge";
    case RefineStatus::Occluded:
        return "occluded";
    }
    return "unknown";
}

std::vector<Vec3> RefinedPath::points() const
{
    std::vector<Vec3> pts;
    pts.reserve(interactions.size() + 2);
    pts.push_back(tx_position);
    for (const auto& i : interactions)
        pts.push_back(i.position);
    pts.push_back(rx_position);
    return pts;
}

double path_length(const std::vector<Vec3>& points)
{
    if (points.size() < 2)
        throw std::invalid_argument("path_length: need at least two points");
    double f = 0.0;
    for (std::size_t k = 0; k + 1 < points.size(); ++k)
        f += (points[k + 1] - points[k]).norm();
    return f;
}

std::optional<Vec3> local_gradient(const Vec3& prev, const Vec3& cur, const Vec3& next)
{
    const Vec3 a = cur - prev;
    const Vec3 b = cur - next;
    const double la = a.norm();
    const double lb = b.norm();
    constexpr double kCoincident = 1e-12;
    if (la < kCoincident || lb < kCoincident)
        return std::nullopt;
    return Vec3(a / la + b / lb);
}

std::optional<Vec2> reflection_gradient(const Vec3& prev, const Vec3& cur, const Vec3& next, const Vec3& u,
                                        const Vec3& v)
{
    const auto g = local_gradient(prev, cur, next);
    if (!g)
        return std::nullopt;
    return Vec2(g->dot(u), g->dot(v));
}

std::optional<double> diffraction_gradient(const Vec3& prev, const Vec3& cur, const Vec3& next, const Vec3& w)
{
    const auto g = local_gradient(prev, cur, next);
    if (!g)
        return std::nullopt;
    return g->dot(w);
}

namespace {

// Shared Armijo loop; x + gamma * step with step = -grad.
template <typename F, typename V>
double armijo(const F& f, const V& x, const V& grad, double fx, double alpha, double beta)
{
    const double slope = -grad.squaredNorm();
    double gamma = 1.0;
    while (f(x - gamma * grad) > fx + alpha * gamma * slope) {
        gamma *= beta;
        if (gamma < kMinLineSearchStep)
            return 0.0;
    }
    return gamma;
}

struct RefineState {
    InteractionKind kind = InteractionKind::Reflection;
    Vec3 position = Vec3::Zero();
    Vec3 basis_normal = Vec3::UnitZ();
    Vec3 normal = Vec3::UnitZ();
    Vec3 u = Vec3::UnitX();
    Vec3 v = Vec3::UnitY();
    int edge = -1;
    double t = 0.0;
    std::uint32_t label = 0;
};

constexpr double kTightFactor = 1e-4;

} // namespace

double backtracking_search(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& grad, double alpha, double beta)
{
    if (grad.size() == 0 || grad.squaredNorm() == 0.0)
        throw std::invalid_argument("backtracking_search: zero gradient");
    return armijo(f, x, grad, f(x), alpha, beta);
}

RefinedPath refine_path(const CoarsePath& coarse, const VoxelizedScene& scene, const std::vector<RadioEndpoint>& txs,
                        const SimulationConfig& cfg)
{
    RefinedPath out;
    out.tx = coarse.tx;
    out.rx = coarse.rx;
    out.tx_position = txs[static_cast<std::size_t>(coarse.tx)].position;
    out.rx_position = scene.receivers[static_cast<std::size_t>(coarse.rx)].position;

    const std::size_t n = coarse.interactions.size();
    std::vector<RefineState> state(n);
    for (std::size_t k = 0; k < n; ++k) {
        const InteractionRecord& r = coarse.interactions[k];
        RefineState& s = state[k];
        s.kind = r.kind;
        s.position = r.position;
        s.label = r.label;
        if (r.kind == InteractionKind::Reflection) {
            s.basis_normal = r.normal.normalized();
            s.normal = s.basis_normal;
            orthonormal_basis(s.basis_normal, s.u, s.v);
        } else {
            s.edge = r.edge;
            s.t = r.t;
            s.position = scene.edges[static_cast<std::size_t>(r.edge)].point_at(r.t);
        }
    }

    const SurfaceParams surface = cfg.refine_surface();
    const double bias = cfg.refine_bias();
    const double segment = scene.grid.voxel_diameter() / (scene.grid.voxel_division * scene.grid.subvoxel_division);
    const double t_d = cfg.distance_threshold;
    const double t_a = deg_to_rad(cfg.angle_threshold_deg);

    std::vector<Vec3> pts(n + 2);
    auto gather = [&] {
        pts.front() = out.tx_position;
        pts.back() = out.rx_position;
        for (std::size_t k = 0; k < n; ++k)
            pts[k + 1] = state[k].position;
    };

    // Squared gradient norm over all unknowns; false on coincident points.
    std::vector<Vec3> grad3(n);
    auto gradient = [&](double& sq) {
        sq = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const auto g = local_gradient(pts[k], pts[k + 1], pts[k + 2]);
            if (!g)
                return false;
            grad3[k] = *g;
            if (state[k].kind == InteractionKind::Reflection)
                sq += std::pow(g->dot(state[k].u), 2) + std::pow(g->dot(state[k].v), 2);
            else
                sq += std::pow(g->dot(scene.edges[static_cast<std::size_t>(state[k].edge)].direction), 2);
        }
        return true;
    };

    gather();
    double grad_sq = 0.0;
    std::vector<Vec3> proposal(n);
    int iter = 0;
    for (; iter < cfg.refinement_iterations && n > 0; ++iter) {
        if (!gradient(grad_sq)) {
            out.status = RefineStatus::Degenerate;
            out.iterations = iter;
            return out;
        }
        if (grad_sq < kTightFactor * cfg.convergence_threshold)
            break;

        // Jacobi: every proposal uses the neighbours of the current iterate.
        for (std::size_t k = 0; k < n; ++k) {
            const Vec3& prev = pts[k];
            const Vec3& next = pts[k + 2];
            const RefineState& s = state[k];
            auto fk = [&](const Vec3& p) { return (p - prev).norm() + (p - next).norm(); };
            const double f0 = fk(s.position);
            if (s.kind == InteractionKind::Reflection) {
                const Vec2 g(grad3[k].dot(s.u), grad3[k].dot(s.v));
                if (g.squaredNorm() == 0.0) {
                    proposal[k] = s.position;
                    continue;
                }
                const double gamma = armijo([&](const Vec2& x) { return fk(s.position + x.x() * s.u + x.y() * s.v); },
                                            Vec2(Vec2::Zero()), g, f0, cfg.alpha, cfg.beta);
                proposal[k] = s.position - gamma * (g.x() * s.u + g.y() * s.v);
            } else {
                const DiffractionEdge& edge = scene.edges[static_cast<std::size_t>(s.edge)];
                const double g = grad3[k].dot(edge.direction);
                if (g == 0.0) {
                    proposal[k] = s.position;
                    continue;
                }
                Eigen::Matrix<double, 1, 1> g1;
                g1(0) = g;
                Eigen::Matrix<double, 1, 1> x0;
                x0(0) = 0.0;
                const double gamma = armijo(
                    [&](const Eigen::Matrix<double, 1, 1>& x) { return fk(edge.point_at(s.t + x(0))); }, x0, g1, f0,
                    cfg.alpha, cfg.beta);
                proposal[k] = edge.point_at(s.t - gamma * g);
            }
        }

        double moved = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            RefineState& s = state[k];
            const Vec3 old = s.position;
            if (s.kind == InteractionKind::Reflection) {
                const Vec3& origin = pts[k];
                const Vec3 delta = proposal[k] - origin;
                const double len = delta.norm();
                if (len < 1e-12) {
                    out.status = RefineStatus::Degenerate;
                    out.iterations = iter;
                    return out;
                }
                const double window = std::max(4.0 * (proposal[k] - old).norm(), segment);
                const auto hit =
                    cast_ray(scene, origin, delta / len, std::max(bias, len - window), len + window, surface);
                if (!hit) {
                    out.status = RefineStatus::SurfaceMiss;
                    out.iterations = iter;
                    return out;
                }
                const Vec3 refined = refine_normal(*hit, scene, surface.sigma);
                const double plane_dist = std::abs((hit->point - old).dot(s.basis_normal));
                const double angle = angle_between(s.basis_normal, refined);
                if (!(plane_dist < t_d && angle < t_a)) {
                    s.basis_normal = refined;
                    orthonormal_basis(s.basis_normal, s.u, s.v);
                }
                s.normal = refined;
                s.position = hit->point;
                s.label = hit->label;
            } else {
                const DiffractionEdge& edge = scene.edges[static_cast<std::size_t>(s.edge)];
                const double t_new = (proposal[k] - edge.start).dot(edge.direction);
                if (t_new < 0.0 || t_new > edge.length()) {
                    out.status = RefineStatus::OffEdge;
                    out.iterations = iter;
                    return out;
                }
                s.t = t_new;
                s.position = edge.point_at(t_new);
            }
            moved = std::max(moved, (s.position - old).norm());
        }
        gather();
        if (moved < 1e-13)
            break;
    }
    out.iterations = iter;

    if (!gradient(grad_sq)) {
        out.status = RefineStatus::Degenerate;
        return out;
    }
    out.grad_sq_norm = grad_sq;
    for (const auto& s : state) {
        RefinedInteraction ri;
        ri.kind = s.kind;
        ri.position = s.position;
        ri.normal = s.normal;
        ri.edge = s.edge;
        ri.t = s.t;
        ri.label = s.label;
        out.interactions.push_back(ri);
    }
    out.length = path_length(pts);
    out.delay = out.length / kSpeedOfLight;
    if (!(grad_sq < cfg.convergence_threshold)) {
        out.status = RefineStatus::NotConverged;
        return out;
    }
    out.status = validate_visibility(out, scene, cfg) ? RefineStatus::Converged : RefineStatus::Occluded;
    return out;
}

std::vector<RefinedPath> refine_paths(const std::vector<CoarsePath>& coarse, const VoxelizedScene& scene,
                                      const std::vector<RadioEndpoint>& txs, const SimulationConfig& cfg)
{
    std::vector<RefinedPath> out(coarse.size());
    parallel_for(coarse.size(), [&](std::size_t i) { out[i] = refine_path(coarse[i], scene, txs, cfg); });
    return out;
}

bool validate_visibility(const RefinedPath& path, const VoxelizedScene& scene, const SimulationConfig& cfg)
{
    const SurfaceParams surface = cfg.refine_surface();
    const double bias = cfg.refine_bias();
    // Interaction points sit on sampled surfaces; allow the local surface estimate some slack there.
    const double surface_slack = std::max(bias, 2.0 * cfg.refine_sample_radius);
    const std::vector<Vec3> pts = path.points();
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const Vec3 delta = pts[k + 1] - pts[k];
        const double len = delta.norm();
        const double b0 = k == 0 ? bias : surface_slack;
        const double b1 = k + 2 == pts.size() ? bias : surface_slack;
        if (len <= b0 + b1)
            continue;
        if (cast_ray(scene, pts[k], delta / len, b0, len - b1, surface))
            return false;
    }
    return true;
}

} // namespace pcrl
