#include "pcrl/scene_model.hpp"
#include "pcrl/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <fstream>
#include <random>
#include <unordered_map>

#include <json.hpp>

namespace pcrl {

namespace {

constexpr double kUnitTolerance = 1e-6;
// sin(1e-4 rad): face normals must be orthogonal to the edge within 1e-4 rad.
constexpr double kOrthogonalityTolerance = 1e-4;

Vec3 vec_from_json(const nlohmann::json& j, const std::string& what)
{
    if (!j.is_array() || j.size() != 3)
        throw InputError(what + ": expected an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json vec_to_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

nlohmann::json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

struct CellKey {
    std::int64_t x, y, z;
    bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
    std::size_t operator()(const CellKey& k) const
    {
        std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ull;
        h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
        h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

} // namespace

PointCloud::PointCloud(std::vector<LabeledPoint> points) : points_(std::move(points))
{
    if (points_.empty())
        throw InputError("point cloud is empty");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const auto& p = points_[i];
        if (!is_finite(p.position))
            throw InputError("point " + std::to_string(i) + ": non-finite position");
        if (!is_finite(p.normal) || std::abs(p.normal.norm() - 1.0) > kUnitTolerance)
            throw InputError("point " + std::to_string(i) + ": normal is not unit length");
        bounds_.expand(p.position);
    }
}

double exterior_angle_factor(const Vec3& face0_normal, const Vec3& face0_tangent, const Vec3& face1_tangent)
{
    const double between = std::acos(std::clamp(face0_tangent.dot(face1_tangent), -1.0, 1.0));
    // Convex wedge: face 1 lies behind the outward normal of face 0.
    const double exterior = face0_normal.dot(face1_tangent) < 0.0 ? 2.0 * kPi - between : between;
    return exterior / kPi;
}

DiffractionEdge make_edge(int id, const Vec3& start, const Vec3& end, const Vec3& face0_normal,
                          const Vec3& face1_normal, const Vec3& face0_tangent, const Vec3& face1_tangent)
{
    const std::string tag = "edge " + std::to_string(id) + ": ";
    if (!is_finite(start) || !is_finite(end))
        throw InputError(tag + "non-finite endpoint");
    const Vec3 span = end - start;
    if (span.norm() <= 1e-12)
        throw InputError(tag + "zero length");
    for (const Vec3* v : {&face0_normal, &face1_normal, &face0_tangent, &face1_tangent})
        if (!is_finite(*v) || v->norm() < 1e-12)
            throw InputError(tag + "degenerate face vector");

    DiffractionEdge edge;
    edge.id = id;
    edge.start = start;
    edge.end = end;
    edge.direction = span.normalized();
    edge.face0_normal = face0_normal.normalized();
    edge.face1_normal = face1_normal.normalized();
    edge.face0_tangent = face0_tangent.normalized();
    edge.face1_tangent = face1_tangent.normalized();

    const Vec3& e = edge.direction;
    if (std::abs(edge.face0_normal.dot(e)) > kOrthogonalityTolerance ||
        std::abs(edge.face1_normal.dot(e)) > kOrthogonalityTolerance)
        throw InputError(tag + "face normal is not orthogonal to the edge direction");
    if (std::abs(edge.face0_tangent.dot(e)) > kOrthogonalityTolerance ||
        std::abs(edge.face1_tangent.dot(e)) > kOrthogonalityTolerance)
        throw InputError(tag + "face tangent is not orthogonal to the edge direction");
    if (std::abs(edge.face0_tangent.dot(edge.face0_normal)) > kOrthogonalityTolerance ||
        std::abs(edge.face1_tangent.dot(edge.face1_normal)) > kOrthogonalityTolerance)
        throw InputError(tag + "face tangent is not orthogonal to its face normal");
    if (edge.face0_tangent.cross(edge.face1_tangent).norm() < 1e-9)
        throw InputError(tag + "face tangents are parallel");

    edge.n_exp = exterior_angle_factor(edge.face0_normal, edge.face0_tangent, edge.face1_tangent);
    if (!(edge.n_exp > 1.0 && edge.n_exp < 2.0))
        throw InputError(tag + "not an exterior edge (n_exp = " + std::to_string(edge.n_exp) +
                         ", required 1 < n_exp < 2)");
    return edge;
}

std::vector<DiffractionEdge> load_edges(const std::filesystem::path& path)
{
    const nlohmann::json root = read_json(path);
    if (!root.is_object() || !root.contains("edges") || !root["edges"].is_array())
        throw InputError(path.string() + ": expected an object with an 'edges' array");

    std::vector<DiffractionEdge> edges;
    for (const auto& item : root["edges"]) {
        const int id = item.value("id", static_cast<int>(edges.size()));
        const std::string tag = "edge " + std::to_string(id);
        for (const char* key : {"start", "end", "face0_normal", "face1_normal", "face0_tangent", "face1_tangent"})
            if (!item.contains(key))
                throw InputError(tag + ": missing '" + key + "'");
        DiffractionEdge edge = make_edge(id, vec_from_json(item["start"], tag + ".start"),
                                         vec_from_json(item["end"], tag + ".end"),
                                         vec_from_json(item["face0_normal"], tag + ".face0_normal"),
                                         vec_from_json(item["face1_normal"], tag + ".face1_normal"),
                                         vec_from_json(item["face0_tangent"], tag + ".face0_tangent"),
                                         vec_from_json(item["face1_tangent"], tag + ".face1_tangent"));
        if (item.contains("n_exp")) {
            const double declared = item["n_exp"].get<double>();
            if (!(declared > 1.0 && declared < 2.0))
                throw InputError(tag + ": n_exp " + std::to_string(declared) + " outside (1, 2)");
            if (std::abs(declared - edge.n_exp) > 1e-3)
                throw InputError(tag + ": declared n_exp disagrees with the face frame");
        }
        for (const auto& other : edges)
            if (other.id == id)
                throw InputError(tag + ": duplicate id");
        edges.push_back(edge);
    }
    return edges;
}

void save_edges(const std::vector<DiffractionEdge>& edges, const std::filesystem::path& path)
{
    nlohmann::json list = nlohmann::json::array();
    for (const auto& e : edges) {
        list.push_back({{"id", e.id},
                        {"start", vec_to_json(e.start)},
                        {"end", vec_to_json(e.end)},
                        {"face0_normal", vec_to_json(e.face0_normal)},
                        {"face1_normal", vec_to_json(e.face1_normal)},
                        {"face0_tangent", vec_to_json(e.face0_tangent)},
                        {"face1_tangent", vec_to_json(e.face1_tangent)},
                        {"n_exp", e.n_exp}});
    }
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write " + path.string());
    out << nlohmann::json{{"edges", list}}.dump(2) << '\n';
}

Endpoints load_endpoints(const std::filesystem::path& path)
{
    const nlohmann::json root = read_json(path);
    Endpoints result;
    auto read_list = [&](const char* key, EndpointKind kind, std::vector<RadioEndpoint>& dst) {
        if (!root.contains(key))
            return;
        for (const auto& item : root[key]) {
            RadioEndpoint ep;
            ep.kind = kind;
            ep.id = item.value("id", static_cast<int>(dst.size()));
            if (!item.contains("position"))
                throw InputError(std::string(key) + " " + std::to_string(ep.id) + ": missing 'position'");
            ep.position = vec_from_json(item["position"], key);
            for (const auto& other : dst)
                if (other.id == ep.id)
                    throw InputError(std::string(key) + ": duplicate id " + std::to_string(ep.id));
            dst.push_back(ep);
        }
    };
    read_list("transmitters", EndpointKind::Transmitter, result.transmitters);
    read_list("receivers", EndpointKind::Receiver, result.receivers);
    if (result.transmitters.empty())
        throw InputError(path.string() + ": no transmitters");
    if (result.receivers.empty())
        throw InputError(path.string() + ": no receivers");
    return result;
}

void save_endpoints(const Endpoints& endpoints, const std::filesystem::path& path)
{
    auto dump = [](const std::vector<RadioEndpoint>& list) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& ep : list)
            arr.push_back({{"id", ep.id}, {"position", vec_to_json(ep.position)}});
        return arr;
    };
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write " + path.string());
    out << nlohmann::json{{"transmitters", dump(endpoints.transmitters)}, {"receivers", dump(endpoints.receivers)}}
               .dump(2)
        << '\n';
}

void validate_endpoints(const Endpoints& endpoints, const Aabb& bounds, double margin)
{
    for (const auto* list : {&endpoints.transmitters, &endpoints.receivers}) {
        for (const auto& ep : *list) {
            const char* kind = ep.kind == EndpointKind::Transmitter ? "transmitter " : "receiver ";
            if (!is_finite(ep.position) || !bounds.contains(ep.position, margin))
                throw InputError(kind + std::to_string(ep.id) + " lies outside the scene bounds");
        }
    }
}

NormalEstimate estimate_normals(const PointCloud& cloud, double radius)
{
    if (!(radius > 0.0))
        throw std::invalid_argument("estimate_normals: radius must be positive");

    const auto& pts = cloud.points();
    const Vec3 origin = cloud.bounds().min;
    const double inv_cell = 1.0 / radius;
    auto key_of = [&](const Vec3& p) {
        const Vec3 c = ((p - origin) * inv_cell).array().floor();
        return CellKey{static_cast<std::int64_t>(c.x()), static_cast<std::int64_t>(c.y()),
                       static_cast<std::int64_t>(c.z())};
    };

    std::unordered_map<CellKey, std::vector<std::uint32_t>, CellKeyHash> cells;
    for (std::uint32_t i = 0; i < pts.size(); ++i)
        cells[key_of(pts[i].position)].push_back(i);

    std::vector<LabeledPoint> out(pts.begin(), pts.end());
    std::vector<char> flag(pts.size(), 0);
    const double r2 = radius * radius;

    parallel_for(pts.size(), [&](std::size_t i) {
        const Vec3& p = pts[i].position;
        const CellKey k = key_of(p);
        Vec3 sum = Vec3::Zero();
        Eigen::Matrix3d outer = Eigen::Matrix3d::Zero();
        std::size_t n = 0;
        for (std::int64_t dx = -1; dx <= 1; ++dx)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dz = -1; dz <= 1; ++dz) {
                    const auto it = cells.find({k.x + dx, k.y + dy, k.z + dz});
                    if (it == cells.end())
                        continue;
                    for (std::uint32_t j : it->second) {
                        const Vec3 d = pts[j].position - p;
                        if (d.squaredNorm() > r2)
                            continue;
                        sum += d;
                        outer += d * d.transpose();
                        ++n;
                    }
                }
        if (n < 3) {
            flag[i] = 1;
            return;
        }
        const Vec3 mean = sum / static_cast<double>(n);
        const Eigen::Matrix3d cov = outer / static_cast<double>(n) - mean * mean.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver;
        solver.computeDirect(cov);
        Vec3 normal = solver.eigenvectors().col(0).normalized();
        if (!is_finite(normal)) {
            flag[i] = 1;
            return;
        }
        if (normal.dot(pts[i].normal) < 0.0)
            normal = -normal;
        out[i].normal = normal;
    });

    NormalEstimate result{PointCloud(std::move(out)), {}};
    for (std::uint32_t i = 0; i < flag.size(); ++i)
        if (flag[i])
            result.flagged.push_back(i);
    return result;
}

PointCloud apply_normal_noise(const PointCloud& cloud, double stddev, std::uint64_t seed)
{
    if (stddev < 0.0)
        throw std::invalid_argument("apply_normal_noise: stddev must be non-negative");
    std::vector<LabeledPoint> out(cloud.points().begin(), cloud.points().end());
    if (stddev == 0.0)
        return PointCloud(std::move(out));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, stddev);
    for (auto& p : out)
        p.position += gauss(rng) * p.normal;
    return PointCloud(std::move(out));
}

} // namespace pcrl
