#include "pcrl/reference_oracle.hpp"

#include <cmath>
#include <algorithm>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>

namespace pcrl::oracle {

namespace {

OVec add(const OVec& a, const OVec& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
OVec sub(const OVec& a, const OVec& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
OVec scale(const OVec& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
double dot(const OVec& a, const OVec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
OVec cross(const OVec& a, const OVec& b)
{
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(const OVec& a) { return std::sqrt(dot(a, a)); }
double angle(const OVec& a, const OVec& b) { return std::atan2(norm(cross(a, b)), dot(a, b)); }

OVec mirror(const OVec& p, const Plane& pl)
{
    return sub(p, scale(pl.normal, 2.0 * dot(sub(p, pl.center), pl.normal)));
}

bool on_rectangle(const OVec& p, const Plane& pl, double tol)
{
    const OVec rel = sub(p, pl.center);
    return std::abs(dot(rel, pl.axis_u)) <= pl.half_u + tol && std::abs(dot(rel, pl.axis_v)) <= pl.half_v + tol;
}

// Parameter in (0, 1) where segment a->b crosses the plane's supporting plane.
std::optional<double> crossing(const OVec& a, const OVec& b, const Plane& pl)
{
    const double denom = dot(sub(b, a), pl.normal);
    if (std::abs(denom) < 1e-15)
        return std::nullopt;
    return dot(sub(pl.center, a), pl.normal) / denom;
}

bool segment_blocked(const AnalyticScene& scene, const OVec& a, const OVec& b)
{
    constexpr double kEndTol = 1e-9;
    for (const Plane& pl : scene.planes) {
        const auto lambda = crossing(a, b, pl);
        if (!lambda || *lambda <= kEndTol || *lambda >= 1.0 - kEndTol)
            continue;
        if (on_rectangle(add(a, scale(sub(b, a), *lambda)), pl, -1e-9))
            return true;
    }
    return false;
}

std::optional<Path> solve_sequence(const AnalyticScene& scene, const std::vector<int>& seq)
{
    const std::size_t m = seq.size();
    std::vector<OVec> images(m + 1);
    images[0] = scene.tx;
    for (std::size_t j = 0; j < m; ++j)
        images[j + 1] = mirror(images[j], scene.planes[static_cast<std::size_t>(seq[j])]);

    std::vector<OVec> pts(m + 2);
    pts[0] = scene.tx;
    pts[m + 1] = scene.rx;
    OVec target = scene.rx;
    for (std::size_t j = m; j >= 1; --j) {
        const Plane& pl = scene.planes[static_cast<std::size_t>(seq[j - 1])];
        const auto lambda = crossing(images[j], target, pl);
        if (!lambda || *lambda <= 0.0 || *lambda >= 1.0)
            return std::nullopt;
        const OVec p = add(images[j], scale(sub(target, images[j]), *lambda));
        if (!on_rectangle(p, pl, 1e-12))
            return std::nullopt;
        pts[j] = p;
        target = p;
    }
    for (std::size_t j = 1; j <= m; ++j) {
        const Plane& pl = scene.planes[static_cast<std::size_t>(seq[j - 1])];
        if (dot(sub(pts[j - 1], pl.center), pl.normal) <= 0.0 || dot(sub(pts[j + 1], pl.center), pl.normal) <= 0.0)
            return std::nullopt;
    }
    Path path;
    path.planes = seq;
    for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
        if (segment_blocked(scene, pts[j], pts[j + 1]))
            return std::nullopt;
        path.length += norm(sub(pts[j + 1], pts[j]));
    }
    path.points = std::move(pts);
    return path;
}

} // namespace

std::vector<Path> image_method_paths(const AnalyticScene& scene, int max_order)
{
    if (max_order < 0 || max_order > 4)
        throw std::invalid_argument("image_method_paths: max_order must lie in [0, 4]");
    std::vector<Path> out;
    std::vector<int> seq;
    const int n = static_cast<int>(scene.planes.size());
    std::function<void()> recurse = [&] {
        if (auto p = solve_sequence(scene, seq))
            out.push_back(std::move(*p));
        if (static_cast<int>(seq.size()) == max_order)
            return;
        for (int i = 0; i < n; ++i) {
            if (!seq.empty() && seq.back() == i)
                continue;
            seq.push_back(i);
            recurse();
            seq.pop_back();
        }
    };
    recurse();
    return out;
}

std::optional<EdgeStationary> edge_stationary_point(const Edge& edge, const OVec& tx, const OVec& rx)
{
    const OVec span = sub(edge.end, edge.start);
    const double len = norm(span);
    if (!(len > 0.0))
        return std::nullopt;
    const OVec dir = scale(span, 1.0 / len);
    auto at = [&](double t) { return add(edge.start, scale(dir, t)); };
    auto f = [&](double t) {
        const OVec p = at(t);
        return norm(sub(p, tx)) + norm(sub(p, rx));
    };

    auto slope = [&](double t) {
        const OVec p = at(t);
        const OVec to_tx = sub(p, tx);
        const OVec to_rx = sub(p, rx);
        return dot(to_tx, dir) / norm(to_tx) + dot(to_rx, dir) / norm(to_rx);
    };
    // f is convex along a line: the minimiser is interior iff the slope changes sign, and
    // golden-section search finds it.
    if (!(slope(0.0) < 0.0 && slope(len) > 0.0))
        return std::nullopt;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0;
    double b = len;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > 1e-10) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // Function values stop resolving t near sqrt(eps); finish by bisecting the derivative's sign.
    a = std::max(0.0, a - 1e-6);
    b = std::min(len, b + 1e-6);
    if (slope(a) < 0.0 && slope(b) > 0.0) {
        for (int i = 0; i < 200 && b - a > 1e-13; ++i) {
            const double m = 0.5 * (a + b);
            (slope(m) < 0.0 ? a : b) = m;
        }
    }
    const double t = 0.5 * (a + b);
    if (t < 1e-7 || t > len - 1e-7)
        return std::nullopt;
    return EdgeStationary{t, at(t), f(t)};
}

PointCloud sample_scene_to_cloud(const AnalyticScene& scene, double density, std::uint64_t seed)
{
    if (!(density > 0.0))
        throw std::invalid_argument("sample_scene_to_cloud: density must be positive");
    std::mt19937_64 rng(seed);
    std::vector<LabeledPoint> pts;
    for (const Plane& pl : scene.planes) {
        if (!std::isfinite(pl.half_u) || !std::isfinite(pl.half_v))
            throw std::invalid_argument("sample_scene_to_cloud: cannot sample an infinite plane");
        const double area = 4.0 * pl.half_u * pl.half_v;
        const auto count = static_cast<std::size_t>(std::llround(area * density));
        std::uniform_real_distribution<double> du(-pl.half_u, pl.half_u);
        std::uniform_real_distribution<double> dv(-pl.half_v, pl.half_v);
        for (std::size_t i = 0; i < count; ++i) {
            const double a = du(rng);
            const double b = dv(rng);
            const OVec p = add(pl.center, add(scale(pl.axis_u, a), scale(pl.axis_v, b)));
            LabeledPoint lp;
            lp.position = Vec3(p[0], p[1], p[2]);
            lp.normal = Vec3(pl.normal[0], pl.normal[1], pl.normal[2]);
            lp.label = pl.label;
            pts.push_back(lp);
        }
    }
    return PointCloud(std::move(pts));
}

AnalyticScene make_box_room(const OVec& size, const OVec& tx, const OVec& rx)
{
    const double sx = size[0];
    const double sy = size[1];
    const double sz = size[2];
    AnalyticScene scene;
    scene.tx = tx;
    scene.rx = rx;
    auto wall = [&](OVec c, OVec n, OVec u, OVec v, double hu, double hv, std::uint32_t label) {
        Plane p;
        p.center = c;
        p.normal = n;
        p.axis_u = u;
        p.axis_v = v;
        p.half_u = hu;
        p.half_v = hv;
        p.label = label;
        scene.planes.push_back(p);
    };
    wall({0.0, sy / 2, sz / 2}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, sy / 2, sz / 2, 0);
    wall({sx, sy / 2, sz / 2}, {-1, 0, 0}, {0, 0, 1}, {0, 1, 0}, sz / 2, sy / 2, 1);
    wall({sx / 2, 0.0, sz / 2}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}, sz / 2, sx / 2, 2);
    wall({sx / 2, sy, sz / 2}, {0, -1, 0}, {1, 0, 0}, {0, 0, 1}, sx / 2, sz / 2, 3);
    wall({sx / 2, sy / 2, 0.0}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}, sx / 2, sy / 2, 4);
    wall({sx / 2, sy / 2, sz}, {0, 0, -1}, {0, 1, 0}, {1, 0, 0}, sy / 2, sx / 2, 5);
    return scene;
}

double specular_error(const AnalyticScene& scene, const Path& path)
{
    double worst = 0.0;
    for (std::size_t k = 0; k < path.planes.size(); ++k) {
        const OVec& n = scene.planes[static_cast<std::size_t>(path.planes[k])].normal;
        const OVec in = sub(path.points[k], path.points[k + 1]);
        const OVec out = sub(path.points[k + 2], path.points[k + 1]);
        worst = std::max(worst, std::abs(angle(in, n) - angle(out, n)));
    }
    return worst;
}

std::vector<int> brute_chebyshev(const OIndex& dims, const std::vector<std::uint8_t>& occupied)
{
    std::vector<OIndex> sources;
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x)
                if (occupied[static_cast<std::size_t>((z * dims[1] + y) * dims[0] + x)])
                    sources.push_back({x, y, z});
    std::vector<int> out(occupied.size(), -1);
    if (sources.empty())
        return out;
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x) {
                int best = std::numeric_limits<int>::max();
                for (const OIndex& s : sources)
                    best = std::min(best, std::max({std::abs(s[0] - x), std::abs(s[1] - y), std::abs(s[2] - z)}));
                out[static_cast<std::size_t>((z * dims[1] + y) * dims[0] + x)] = best;
            }
    return out;
}

std::vector<DdaCell> exact_dda(const OVec& origin, const OVec& dir, const OIndex& dims)
{
    OIndex cell{};
    OIndex step{};
    OVec t_next{};
    OVec t_delta{};
    const double inf = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        cell[a] = static_cast<int>(std::floor(origin[a]));
        if (dir[a] > 0.0) {
            step[a] = 1;
            t_delta[a] = 1.0 / dir[a];
            t_next[a] = (cell[a] + 1 - origin[a]) / dir[a];
        } else if (dir[a] < 0.0) {
            step[a] = -1;
            t_delta[a] = -1.0 / dir[a];
            t_next[a] = (cell[a] - origin[a]) / dir[a];
        } else {
            step[a] = 0;
            t_delta[a] = inf;
            t_next[a] = inf;
        }
    }
    std::vector<DdaCell> out;
    double t = 0.0;
    auto inside = [&] {
        for (int a = 0; a < 3; ++a)
            if (cell[a] < 0 || cell[a] >= dims[a])
                return false;
        return true;
    };
    while (inside()) {
        int axis = 0;
        if (t_next[1] < t_next[axis])
            axis = 1;
        if (t_next[2] < t_next[axis])
            axis = 2;
        out.push_back({cell, t, t_next[axis]});
        t = t_next[axis];
        if (!std::isfinite(t))
            break;
        cell[axis] += step[axis];
        t_next[axis] += t_delta[axis];
    }
    return out;
}

} // namespace pcrl::oracle
