#include "checks.hpp"
#include "fixtures.hpp"

#include "pcrl/path_refinement.hpp"

#include <doctest.h>

#include <random>

using namespace pcrl;

namespace {

double f_local(const Vec3& prev, const Vec3& cur, const Vec3& next) { return (cur - prev).norm() + (cur - next).norm(); }

oracle::Plane rect(const Vec3& center, const Vec3& u, const Vec3& v, double hu, double hv, std::uint32_t label)
{
    oracle::Plane p;
    p.center = fixtures::ov(center);
    p.axis_u = fixtures::ov(u);
    p.axis_v = fixtures::ov(v);
    p.normal = fixtures::ov(u.cross(v));
    p.half_u = hu;
    p.half_v = hv;
    p.label = label;
    return p;
}

SimulationConfig refine_config()
{
    SimulationConfig cfg;
    cfg.voxel_size = 0.5;
    return cfg;
}

InteractionRecord reflection_at(const Vec3& p, const Vec3& n, std::uint32_t label)
{
    InteractionRecord r;
    r.kind = InteractionKind::Reflection;
    r.position = p;
    r.normal = n;
    r.label = label;
    return r;
}

CoarsePath coarse_of(std::vector<InteractionRecord> interactions)
{
    CoarsePath c;
    c.interactions = std::move(interactions);
    return c;
}

} // namespace

TEST_SUITE("path_refinement")
{
    TEST_CASE("path length")
    {
        CHECK(path_length({Vec3(0, 0, 0), Vec3(1, 0, 0)}) == 1.0);
        CHECK(path_length({Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(2, 0, 1)}) == doctest::Approx(2 * std::sqrt(2.0)));
        const double a = path_length({Vec3(0, 0, 0), Vec3(1, 1, 0), Vec3(3, 0, 0), Vec3(4, 0, 0)});
        const double b = path_length({Vec3(0, 0, 0), Vec3(3, 0, 0), Vec3(1, 1, 0), Vec3(4, 0, 0)});
        CHECK(a != doctest::Approx(b));
        CHECK_THROWS_AS(path_length({Vec3::Zero()}), std::invalid_argument);
    }

    TEST_CASE("gradient at the mirror point vanishes")
    {
        const auto g = reflection_gradient(Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(2, 0, 1), Vec3::UnitX(), Vec3::UnitY());
        REQUIRE(g);
        CHECK(std::abs(g->x()) < 1e-9);
        CHECK(std::abs(g->y()) < 1e-9);
    }

    TEST_CASE("gradient off the mirror point")
    {
        const auto g = reflection_gradient(Vec3(0, 0, 1), Vec3(0.5, 0, 0), Vec3(2, 0, 1), Vec3::UnitX(), Vec3::UnitY());
        REQUIRE(g);
        CHECK(g->x() == doctest::Approx(0.5 / std::sqrt(1.25) - 1.5 / std::sqrt(3.25)).epsilon(1e-14));
        CHECK(g->x() == doctest::Approx(-0.38490).epsilon(1e-4));
        CHECK(std::abs(g->y()) < 1e-15);
    }

    TEST_CASE("coincident neighbours are degenerate")
    {
        CHECK_FALSE(local_gradient(Vec3(1, 2, 3), Vec3(1, 2, 3), Vec3(0, 0, 0)));
        CHECK_FALSE(diffraction_gradient(Vec3(0, 0, 0), Vec3(1, 2, 3), Vec3(1, 2, 3), Vec3::UnitZ()));
    }

    TEST_CASE("gradients match central differences")
    {
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        const double h = 1e-6;
        for (int trial = 0; trial < 300; ++trial) {
            const Vec3 prev(u(rng), u(rng), u(rng));
            const Vec3 cur(u(rng), u(rng), u(rng));
            const Vec3 next(u(rng), u(rng), u(rng));
            const Vec3 a = checks::random_direction(rng);
            const Vec3 b = a.unitOrthogonal();
            const auto g3 = local_gradient(prev, cur, next);
            const auto g2 = reflection_gradient(prev, cur, next, a, b);
            const auto g1 = diffraction_gradient(prev, cur, next, a);
            REQUIRE(g3);
            REQUIRE(g2);
            REQUIRE(g1);
            Vec3 fd;
            for (int i = 0; i < 3; ++i) {
                Vec3 e = Vec3::Zero();
                e[i] = h;
                fd[i] = (f_local(prev, cur + e, next) - f_local(prev, cur - e, next)) / (2 * h);
            }
            CHECK((fd - *g3).norm() / std::max(g3->norm(), 1e-3) < 1e-5);
            const double fa = (f_local(prev, cur + h * a, next) - f_local(prev, cur - h * a, next)) / (2 * h);
            const double fb = (f_local(prev, cur + h * b, next) - f_local(prev, cur - h * b, next)) / (2 * h);
            CHECK(std::abs(fa - g2->x()) / std::max(std::abs(g2->x()), 1e-3) < 1e-5);
            CHECK(std::abs(fb - g2->y()) / std::max(std::abs(g2->y()), 1e-3) < 1e-5);
            CHECK(*g1 == doctest::Approx(g2->x()).epsilon(1e-14));
        }
    }

    TEST_CASE("Armijo backtracking on a parabola")
    {
        const auto f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
        Eigen::VectorXd x(1), g(1);
        x << 1.0;
        g << 2.0;
        CHECK(backtracking_search(f, x, g, 0.4, 0.4) == doctest::Approx(0.4).epsilon(1e-15));
        g << 0.0;
        CHECK_THROWS_AS(backtracking_search(f, x, g, 0.4, 0.4), std::invalid_argument);
        // An increasing direction never satisfies the condition.
        g << -2.0;
        CHECK(backtracking_search(f, x, g, 0.4, 0.4) == 0.0);
    }

    TEST_CASE("single reflection converges to the mirror point")
    {
        oracle::AnalyticScene as;
        as.planes.push_back(rect(Vec3(1, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 1.5, 0.5, 0));
        const PointCloud cloud = oracle::sample_scene_to_cloud(as, 1e4, 3);
        const std::vector<RadioEndpoint> txs = {fixtures::tx_at(Vec3(0, 0, 1))};
        const std::vector<RadioEndpoint> rxs = {fixtures::rx_at(Vec3(2, 0, 1))};
        const SimulationConfig cfg = refine_config();
        const VoxelizedScene scene = build_scene(cloud, {}, rxs, cfg, txs);
        const RefinedPath r =
            refine_path(coarse_of({reflection_at(Vec3(0.3, 0, 0), Vec3::UnitZ(), 0)}), scene, txs, cfg);
        REQUIRE(r.status == RefineStatus::Converged);
        REQUIRE(r.interactions.size() == 1);
        CHECK((r.interactions[0].position - Vec3(1, 0, 0)).norm() < 1e-3);
        CHECK(r.length == doctest::Approx(2 * std::sqrt(2.0)).epsilon(1e-6));
        CHECK(r.grad_sq_norm < 1e-4);
        CHECK(r.delay == doctest::Approx(r.length / kSpeedOfLight).epsilon(1e-15));
        CHECK(validate_visibility(r, scene, cfg));
    }

    TEST_CASE("single diffraction settles at the symmetric point")
    {
        const DiffractionEdge edge =
            fixtures::right_angle_edge(0, Vec3::Zero(), Vec3(0, 0, 2), Vec3::UnitX(), Vec3::UnitY());
        const std::vector<RadioEndpoint> txs = {fixtures::tx_at(Vec3(1, 0, 0))};
        const std::vector<RadioEndpoint> rxs = {fixtures::rx_at(Vec3(0, 1, 2))};
        SimulationConfig cfg = refine_config();
        cfg.max_diffractions = 1;
        const VoxelizedScene scene = build_scene(PointCloud(), {edge}, rxs, cfg, txs);
        InteractionRecord d;
        d.kind = InteractionKind::Diffraction;
        d.edge = 0;
        d.t = 0.4;
        d.position = edge.point_at(0.4);
        const RefinedPath r = refine_path(coarse_of({d}), scene, txs, cfg);
        REQUIRE(r.status == RefineStatus::Converged);
        CHECK(r.interactions[0].t == doctest::Approx(1.0).epsilon(1e-4));
        const Vec3 p = r.interactions[0].position;
        const double in = angle_between((p - txs[0].position).normalized(), edge.direction);
        const double out = angle_between((rxs[0].position - p).normalized(), edge.direction);
        CHECK(rad_to_deg(std::abs(in - out)) < 0.5);
    }

    TEST_CASE("diffraction pushed past the edge end aborts")
    {
        const DiffractionEdge edge =
            fixtures::right_angle_edge(0, Vec3::Zero(), Vec3(0, 0, 0.5), Vec3::UnitX(), Vec3::UnitY());
        const std::vector<RadioEndpoint> txs = {fixtures::tx_at(Vec3(1, 0, 0))};
        const std::vector<RadioEndpoint> rxs = {fixtures::rx_at(Vec3(0, 1, 2))};
        SimulationConfig cfg = refine_config();
        cfg.max_diffractions = 1;
        const VoxelizedScene scene = build_scene(PointCloud(), {edge}, rxs, cfg, txs);
        InteractionRecord d;
        d.kind = InteractionKind::Diffraction;
        d.edge = 0;
        d.t = 0.25;
        d.position = edge.point_at(0.25);
        CHECK(refine_path(coarse_of({d}), scene, txs, cfg).status == RefineStatus::OffEdge);
    }

    TEST_CASE("two reflections between parallel planes match the image method")
    {
        oracle::AnalyticScene as;
        as.planes.push_back(rect(Vec3(1.5, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 2.0, 0.5, 0));
        as.planes.push_back(rect(Vec3(1.5, 0, 1), Vec3::UnitY(), Vec3::UnitX(), 0.5, 2.0, 1));
        as.tx = {0, 0, 0.5};
        as.rx = {3, 0, 0.5};
        const auto truth = oracle::image_method_paths(as, 2);
        const PointCloud cloud = oracle::sample_scene_to_cloud(as, 1e4, 5);
        const std::vector<RadioEndpoint> txs = {fixtures::tx_at(fixtures::ev(as.tx))};
        const std::vector<RadioEndpoint> rxs = {fixtures::rx_at(fixtures::ev(as.rx))};
        const SimulationConfig cfg = refine_config();
        const VoxelizedScene scene = build_scene(cloud, {}, rxs, cfg, txs);
        int checked = 0;
        for (const auto& t : truth) {
            if (t.planes.size() != 2)
                continue;
            ++checked;
            std::vector<InteractionRecord> recs;
            for (std::size_t k = 0; k < 2; ++k) {
                const auto& pl = as.planes[static_cast<std::size_t>(t.planes[k])];
                recs.push_back(reflection_at(fixtures::ev(t.points[k + 1]) + Vec3(0.03, -0.02, 0),
                                             fixtures::ev(pl.normal), pl.label));
            }
            const RefinedPath r = refine_path(coarse_of(recs), scene, txs, cfg);
            REQUIRE(r.status == RefineStatus::Converged);
            for (std::size_t k = 0; k < 2; ++k)
                CHECK((r.interactions[k].position - fixtures::ev(t.points[k + 1])).norm() < 1e-3);
            CHECK(r.length == doctest::Approx(t.length).epsilon(1e-6));
        }
        CHECK(checked == 2);
    }

    TEST_CASE("visibility validation")
    {
        SimulationConfig cfg = refine_config();
        const std::vector<RadioEndpoint> txs = {fixtures::tx_at(Vec3(0, 0, 0.5))};
        const std::vector<RadioEndpoint> rxs = {fixtures::rx_at(Vec3(2, 0, 0.5))};
        RefinedPath los;
        los.tx_position = txs[0].position;
        los.rx_position = rxs[0].position;
        los.length = 2.0;
        los.status = RefineStatus::Converged;

        const VoxelizedScene empty = build_scene(PointCloud(), {}, rxs, cfg, txs);
        CHECK(validate_visibility(los, empty, cfg));

        // Wall x = 1 facing the transmitter, spanning the segment.
        const PointCloud wall(
            fixtures::grid_plane(Vec3(1, -0.5, 0), Vec3::UnitZ(), Vec3::UnitY(), 1.0, 1.0, 0.005, 7));
        const VoxelizedScene blocked = build_scene(wall, {}, rxs, cfg, txs);
        CHECK_FALSE(validate_visibility(los, blocked, cfg));
    }
}
