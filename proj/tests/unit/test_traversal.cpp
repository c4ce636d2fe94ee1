#include "checks.hpp"
#include "fixtures.hpp"

#include "pcrl/traversal.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace pcrl;

namespace {

bool contains(const std::vector<std::uint32_t>& ids, std::uint32_t id)
{
    return std::find(ids.begin(), ids.end(), id) != ids.end();
}

std::int64_t receiver_ie(const VoxelizedScene& scene, int receiver)
{
    for (std::size_t k = 0; k < scene.ies.size(); ++k)
        if (scene.ies[k].kind == IeKind::Receiver && scene.ies[k].receiver == receiver)
            return static_cast<std::int64_t>(k);
    return -1;
}

} // namespace

TEST_SUITE("traversal")
{
    TEST_CASE("march step hand traces")
    {
        CHECK((voxel_ray_march_step(Vec3(0.2, 0.5, 0.5), Vec3::UnitX(), 1) - Vec3(1.01, 0.5, 0.5)).norm() < 1e-12);
        CHECK((voxel_ray_march_step(Vec3(0.5, 0.5, 0.5), Vec3::UnitY(), 3) - Vec3(0.5, 3.01, 0.5)).norm() < 1e-12);
        const double h = std::sqrt(0.5);
        const Vec3 diag = voxel_ray_march_step(Vec3(0.5, 0.5, 0.5), Vec3(h, h, 0), 1);
        const double s = 0.5 / h + 0.01;
        CHECK((diag - Vec3(0.5 + h * s, 0.5 + h * s, 0.5)).norm() < 1e-12);
        CHECK(diag.x() == doctest::Approx(1.00707).epsilon(1e-5));
    }

    TEST_CASE("march step on negative directions")
    {
        const Vec3 v = voxel_ray_march_step(Vec3(2.25, 0.5, 0.5), -Vec3::UnitX(), 1);
        CHECK((v - Vec3(1.99, 0.5, 0.5)).norm() < 1e-12);
        const Vec3 w = voxel_ray_march_step(Vec3(2.25, 0.5, 0.5), -Vec3::UnitX(), 2);
        CHECK((w - Vec3(0.99, 0.5, 0.5)).norm() < 1e-12);
    }

    TEST_CASE("unit march equals the exact DDA")
    {
        std::mt19937_64 rng(21);
        std::uniform_int_distribution<int> side(1, 32);
        for (int trial = 0; trial < 200; ++trial) {
            const Vec3i dims(side(rng), side(rng), side(rng));
            std::uniform_real_distribution<double> ux(0.0, dims.x());
            std::uniform_real_distribution<double> uy(0.0, dims.y());
            std::uniform_real_distribution<double> uz(0.0, dims.z());
            const Vec3 origin(ux(rng), uy(rng), uz(rng));
            const std::string why = checks::march_matches_dda(origin, checks::random_direction(rng), dims);
            CHECK_MESSAGE(why.empty(), why);
        }
    }

    TEST_CASE("axis-aligned march equals the DDA")
    {
        for (const Vec3& d : {Vec3(1, 0, 0), Vec3(0, -1, 0), Vec3(0, 0, 1)}) {
            const std::string why = checks::march_matches_dda(Vec3(3.5, 4.5, 0.5), d, Vec3i(8, 8, 8));
            CHECK_MESSAGE(why.empty(), why);
        }
    }

    TEST_CASE("cone sphere test")
    {
        CHECK(cone_intersects_sphere(Vec3::Zero(), Vec3::UnitX(), 0.01, Vec3(10, 0, 0), 0.1));
        CHECK(cone_intersects_sphere(Vec3::Zero(), Vec3::UnitX(), 0.01, Vec3(0.05, 0.05, 0), 0.1));
        CHECK_FALSE(cone_intersects_sphere(Vec3::Zero(), Vec3::UnitX(), 0.01, Vec3(10, 1, 0), 0.5));
        CHECK(cone_intersects_sphere(Vec3::Zero(), Vec3::UnitX(), 0.06, Vec3(10, 1, 0), 0.5));
        CHECK_FALSE(cone_intersects_sphere(Vec3::Zero(), Vec3::UnitX(), 0.2, Vec3(-10, 0, 0), 0.5));
    }

    TEST_CASE("cone pointing away from every IE finds nothing")
    {
        const VoxelizedScene scene = checks::receiver_grid({Vec3(12, 12, 12)});
        ConeRay cone = ConeRay::reflection(Vec3(2, 2, 2), Vec3(-1, 0, 0), 0.02);
        cone.interaction_count = 3;
        CHECK(trace_cone(cone, scene).empty());
    }

    TEST_CASE("IE dead ahead is found by a narrow cone")
    {
        const VoxelizedScene scene = checks::receiver_grid({Vec3(12.0, 4.0, 4.0)});
        const std::int64_t id = receiver_ie(scene, 2);
        REQUIRE(id >= 0);
        for (int count : {1, 3}) {
            ConeRay cone = ConeRay::reflection(Vec3(2.0, 4.0, 4.0), Vec3::UnitX(), 0.005);
            cone.interaction_count = count;
            CHECK(contains(trace_cone(cone, scene), static_cast<std::uint32_t>(id)));
        }
    }

    TEST_CASE("separation planes exclude IEs outside the wedge")
    {
        const VoxelizedScene scene = checks::receiver_grid({Vec3(12.0, 4.3, 4.0), Vec3(12.0, 3.7, 4.0)});
        const std::int64_t above = receiver_ie(scene, 2);
        const std::int64_t below = receiver_ie(scene, 3);
        ConeRay cone;
        cone.origin = Vec3(2.0, 4.0, 4.0);
        cone.direction = Vec3::UnitX();
        cone.half_angle = 0.1;
        cone.sep_normals = {Vec3::UnitY(), -Vec3::UnitX()};
        cone.interaction_count = 3;
        const auto ids = trace_cone(cone, scene);
        CHECK_FALSE(contains(ids, static_cast<std::uint32_t>(above)));
        CHECK(contains(ids, static_cast<std::uint32_t>(below)));
    }

    TEST_CASE("receivers pass on the voxel test for early interactions only")
    {
        // The receiver's voxel sphere meets the narrow cone, its subvoxel sphere does not.
        const VoxelizedScene scene = checks::receiver_grid({Vec3(11.0, 8.4, 8.0)});
        const std::int64_t id = receiver_ie(scene, 2);
        REQUIRE(id >= 0);
        ConeRay cone = ConeRay::reflection(Vec3(1.0, 7.6, 8.0), Vec3::UnitX(), 0.001);
        cone.interaction_count = 2;
        CHECK(contains(trace_cone(cone, scene), static_cast<std::uint32_t>(id)));
        cone.interaction_count = 3;
        CHECK_FALSE(contains(trace_cone(cone, scene), static_cast<std::uint32_t>(id)));
    }

    TEST_CASE("source IE is never a candidate")
    {
        const VoxelizedScene scene = checks::receiver_grid({Vec3(8.0, 8.0, 8.0)});
        const std::int64_t id = receiver_ie(scene, 2);
        ConeRay cone = ConeRay::reflection(Vec3(2.0, 8.0, 8.0), Vec3::UnitX(), 0.01);
        cone.source_ie = id;
        CHECK_FALSE(contains(trace_cone(cone, scene), static_cast<std::uint32_t>(id)));
    }

    TEST_CASE("cone skipping is sound on small grids")
    {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> pos(0.5, 14.5);
        std::uniform_real_distribution<double> angle(0.0, 0.15);
        std::uniform_int_distribution<int> count(1, 12);
        for (int scene_trial = 0; scene_trial < 10; ++scene_trial) {
            std::vector<Vec3> rx;
            for (int i = count(rng); i > 0; --i)
                rx.push_back(Vec3(pos(rng), pos(rng), pos(rng)));
            const VoxelizedScene scene = checks::receiver_grid(rx);
            for (int ray = 0; ray < 20; ++ray) {
                const ConeRay cone = ConeRay::reflection(Vec3(pos(rng), pos(rng), pos(rng)),
                                                         checks::random_direction(rng), angle(rng));
                const std::string why = checks::cone_skip_sound(cone, scene);
                CHECK_MESSAGE(why.empty(), why);
            }
        }
    }

    TEST_CASE("visibility in an empty scene")
    {
        const VoxelizedScene scene = checks::receiver_grid({Vec3(8, 8, 8)});
        const std::int64_t id = receiver_ie(scene, 2);
        const SurfaceParams sp;
        CHECK(trace_visibility(scene, Vec3(2, 3, 4), scene.ies[static_cast<std::size_t>(id)], id, 0.003, sp).visible);
        CHECK(segment_clear(scene, Vec3(1, 1, 1), Vec3(13, 12, 11), 0.003, sp));
        CHECK(segment_clear(scene, Vec3(13, 12, 11), Vec3(1, 1, 1), 0.003, sp));
    }

    TEST_CASE("a plane between origin and receiver occludes it")
    {
        SimulationConfig cfg;
        cfg.voxel_size = 0.5;
        // Sampled surfaces are one-sided: the wall faces down, toward the origin under it.
        const PointCloud wall(fixtures::horizontal_patch(0.5, 0.5, 1.0, 0.5, 0.01, 0, true));
        const VoxelizedScene scene = build_scene(wall, {}, {fixtures::rx_at(Vec3(0.5, 0.5, 1.8))}, cfg);
        const std::int64_t id = receiver_ie(scene, 0);
        const SurfaceParams sp = cfg.coarse_surface();
        const Visibility below =
            trace_visibility(scene, Vec3(0.5, 0.5, 0.2), scene.ies[static_cast<std::size_t>(id)], id, 0.003, sp);
        CHECK_FALSE(below.visible);
        CHECK(segment_clear(scene, Vec3(0.5, 0.5, 1.8), Vec3(0.5, 0.5, 0.2), 0.003, sp));
        const Visibility beside =
            trace_visibility(scene, Vec3(1.5, 0.5, 1.8), scene.ies[static_cast<std::size_t>(id)], id, 0.003, sp);
        CHECK(beside.visible);
        CHECK_FALSE(segment_clear(scene, Vec3(0.6, 0.4, 0.5), Vec3(0.5, 0.5, 1.5), 0.003, sp));
        const auto hit = cast_ray(scene, Vec3(0.5, 0.5, 0.5), Vec3::UnitZ(), 0.0, 1.0, sp);
        REQUIRE(hit);
        CHECK(hit->distance == doctest::Approx(0.5).epsilon(4e-3));
    }

    TEST_CASE("closest of two stacked planes is the hit")
    {
        SimulationConfig cfg;
        cfg.voxel_size = 0.5;
        const PointCloud two = fixtures::join(
            {fixtures::horizontal_patch(0.5, 0.5, 0.2, 0.4, 0.01, 0), fixtures::horizontal_patch(0.5, 0.5, 0.7, 0.4, 0.01, 1)});
        const VoxelizedScene scene = build_scene(two, {}, {}, cfg);
        const auto hit = cast_ray(scene, Vec3(0.45, 0.55, 1.5), -Vec3::UnitZ(), 0.0, 5.0, cfg.coarse_surface());
        REQUIRE(hit);
        CHECK(hit->label == 1);
        CHECK(std::abs(hit->point.z() - 0.7) < cfg.sdf_threshold);
    }

    TEST_CASE("PCIE visibility lands on the target PCIE")
    {
        SimulationConfig cfg;
        cfg.voxel_size = 0.5;
        // Kept off the subvoxel lattice so no sample row sits on a subvoxel boundary.
        const PointCloud floor(fixtures::horizontal_patch(0.503, 0.497, 0.0, 0.49, 0.01));
        const VoxelizedScene scene = build_scene(floor, {}, {}, cfg);
        const SurfaceParams sp = cfg.coarse_surface();
        int visible = 0;
        for (std::size_t k = 0; k < scene.ies.size(); ++k) {
            const Visibility v = trace_visibility(scene, Vec3(0.5, 0.5, 1.0), scene.ies[k], static_cast<std::int64_t>(k),
                                                  cfg.coarse_bias(), sp);
            if (!v.visible)
                continue;
            ++visible;
            REQUIRE(v.hit);
            CHECK(v.hit->pcie == k);
            CHECK(std::abs(v.hit->point.z()) < sp.sdf_threshold);
        }
        CHECK(visible >= static_cast<int>(scene.ies.size()) - 2);
    }

    TEST_CASE("DEIE on top of its wall stays visible with the bias")
    {
        SimulationConfig cfg;
        cfg.voxel_size = 0.5;
        // Block corner: top face z = 0 for x <= 1, side face x = 1 for z <= 0, edge along y.
        const PointCloud block = fixtures::join(
            {fixtures::grid_plane(Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 1.0, 1.0, 0.005, 0),
             fixtures::grid_plane(Vec3(1, 0, -1), Vec3::UnitY(), Vec3::UnitZ(), 1.0, 1.0, 0.005, 1)});
        const DiffractionEdge edge =
            fixtures::right_angle_edge(0, Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3::UnitX(), Vec3::UnitZ());
        const VoxelizedScene scene = build_scene(block, {edge}, {}, cfg);
        const SurfaceParams sp = cfg.coarse_surface();
        int edges = 0;
        for (std::size_t k = 0; k < scene.ies.size(); ++k) {
            if (scene.ies[k].kind != IeKind::DiffractionEdge)
                continue;
            ++edges;
            CHECK(trace_visibility(scene, Vec3(1.6, scene.ies[k].reception_point.y(), 0.6), scene.ies[k],
                                   static_cast<std::int64_t>(k), 2 * cfg.sdf_threshold, sp)
                      .visible);
        }
        CHECK(edges >= 4);
    }

    TEST_CASE("cone apex angle")
    {
        VoxelGrid grid;
        grid.voxel_edge = 0.5;
        Aabb cube;
        cube.expand(Vec3::Zero());
        cube.expand(Vec3::Constant(10.0));
        const double a5 = compute_cone_apex_angle(grid, cube);
        CHECK(rad_to_deg(a5) == doctest::Approx(3.3076).epsilon(1e-3));
        CHECK(a5 == doctest::Approx(2 * std::atan(0.5 / (10 * std::sqrt(3.0)))));
        grid.voxel_edge = 0.4;
        CHECK(compute_cone_apex_angle(grid, cube) < a5);
        grid.voxel_edge = 1e-9;
        CHECK(compute_cone_apex_angle(grid, cube) < 1e-9);
    }
}
