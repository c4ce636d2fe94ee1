#include "checks.hpp"
#include "fixtures.hpp"

#include "pcrl/diffraction_geometry.hpp"

#include <doctest.h>

#include <random>

using namespace pcrl;

namespace {

DiffractionEdge corner()
{
    return fixtures::right_angle_edge(0, Vec3::Zero(), Vec3(0, 0, 2), Vec3::UnitX(), Vec3::UnitY());
}

// Wedge between the two tangents in 3D: the sector swept from tangent 0 to tangent 1.
bool in_wedge(const KellerRay& r, const Vec3& d)
{
    return r.sep_normals[0].dot(d) <= 1e-12 && r.sep_normals[1].dot(d) <= 1e-12;
}

} // namespace

TEST_SUITE("diffraction_geometry")
{
    TEST_CASE("right-angle corner at ten degrees gives 27 rays over 270 degrees")
    {
        const EdgeFan2D fan = precompute_edge_fan(corner(), 10.0);
        REQUIRE(fan.rays.size() == 27);
        CHECK(fan.extent == doctest::Approx(1.5 * kPi));
        CHECK(fan.wedge * 27 == doctest::Approx(fan.extent).epsilon(1e-12));
    }

    TEST_CASE("a step wider than the exterior angle gives one ray")
    {
        CHECK(precompute_edge_fan(corner(), 300.0).rays.size() == 1);
        CHECK(make_edge_fan(corner(), 0).rays.size() == 1);
    }

    TEST_CASE("adjacent rays share a separation tangent and cover the extent once")
    {
        const EdgeFan2D fan = precompute_edge_fan(corner(), 2.5);
        double covered = 0.0;
        for (std::size_t i = 0; i < fan.rays.size(); ++i) {
            const FanRay2D& r = fan.rays[i];
            CHECK(std::abs(r.direction.norm() - 1.0) < 1e-12);
            const double a0 = std::atan2(r.sep_tangents[0].y(), r.sep_tangents[0].x());
            const double a1 = std::atan2(r.sep_tangents[1].y(), r.sep_tangents[1].x());
            double w = a1 - a0;
            if (w < 0)
                w += 2 * kPi;
            covered += w;
            if (i + 1 < fan.rays.size())
                CHECK((r.sep_tangents[1] - fan.rays[i + 1].sep_tangents[0]).norm() < 1e-12);
        }
        CHECK(std::abs(covered - fan.extent) < 1e-6);
        CHECK((fan.rays.front().sep_tangents[0] - Vec2::UnitX()).norm() < 1e-12);
    }

    TEST_CASE("fan rays stay out of the solid")
    {
        const DiffractionEdge e = corner();
        const EdgeFan2D fan = precompute_edge_fan(e, 5.0);
        const auto set = lift_to_keller_cone(fan, e, Vec3(1, 1, 0).normalized());
        REQUIRE(set);
        for (const auto& r : set->rays) {
            // Solid is the quadrant x < 0, y < 0 around the z axis.
            CHECK_FALSE((r.direction.x() < -1e-9 && r.direction.y() < -1e-9));
        }
    }

    TEST_CASE("degenerate face frame is rejected")
    {
        DiffractionEdge e = corner();
        e.face1_tangent = e.face0_tangent;
        CHECK_THROWS_AS(precompute_edge_fan(e, 10.0), InputError);
    }

    TEST_CASE("optimal ray count")
    {
        CHECK(optimal_ray_count(27, kPi / 2) == 27);
        CHECK(optimal_ray_count(27, kPi / 6) == 14);
        CHECK(optimal_ray_count(27, 1e-9) == 1);
        CHECK(optimal_ray_count(27, 5 * kPi / 6) == 14);
    }

    TEST_CASE("lift at a right angle stays in the orthogonal plane")
    {
        const DiffractionEdge e = corner();
        const EdgeFan2D fan = precompute_edge_fan(e, 10.0);
        const auto set = lift_to_keller_cone(fan, e, Vec3(1, 0.5, 0).normalized());
        REQUIRE(set);
        CHECK(set->theta == doctest::Approx(kPi / 2));
        for (const auto& r : set->rays)
            CHECK(std::abs(r.direction.dot(e.direction)) < 1e-12);
        // First ray sits half a wedge from the face 0 tangent.
        CHECK(angle_between(set->rays.front().direction, e.face0_tangent) == doctest::Approx(0.5 * fan.wedge));
    }

    TEST_CASE("Keller condition and separation planes for random incidence")
    {
        std::mt19937_64 rng(12);
        const DiffractionEdge e = corner();
        const EdgeFan2D fan = precompute_edge_fan(e, 7.5);
        for (int trial = 0; trial < 200; ++trial) {
            const Vec3 in = checks::random_direction(rng);
            const auto set = lift_to_keller_cone(fan, e, in);
            REQUIRE(set);
            const double cos_theta = std::cos(set->theta);
            CHECK(cos_theta == doctest::Approx(in.dot(e.direction)).epsilon(1e-12));
            for (std::size_t i = 0; i < set->rays.size(); ++i) {
                const KellerRay& r = set->rays[i];
                CHECK(std::abs(r.direction.norm() - 1.0) < 1e-12);
                CHECK(std::abs(r.direction.dot(e.direction) - cos_theta) < 1e-5);
                const FanRay2D& f = fan.rays[i];
                for (int j = 0; j < 2; ++j) {
                    const Vec3 t = (f.sep_tangents[j].x() * e.face0_tangent + f.sep_tangents[j].y() * e.face0_normal) *
                                       std::sin(set->theta) +
                                   e.direction * cos_theta;
                    CHECK(std::abs(r.sep_normals[j].norm() - 1.0) < 1e-12);
                    CHECK(std::abs(r.sep_normals[j].dot(t)) < 1e-6);
                    CHECK(std::abs(r.sep_normals[j].dot(e.direction)) < 1e-12);
                    // Normals face away from the ray they bound.
                    CHECK(r.sep_normals[j].dot(r.direction) < 0.0);
                }
                CHECK(in_wedge(r, r.direction));
                if (i + 1 < set->rays.size()) {
                    CHECK_FALSE(in_wedge(r, set->rays[i + 1].direction));
                    CHECK_FALSE(in_wedge(set->rays[i + 1], r.direction));
                }
            }
        }
    }

    TEST_CASE("incidence along the edge is degenerate")
    {
        const DiffractionEdge e = corner();
        CHECK_FALSE(lift_to_keller_cone(precompute_edge_fan(e, 10.0), e, Vec3::UnitZ()));
        CHECK_FALSE(lift_to_keller_cone(precompute_edge_fan(e, 10.0), e, -Vec3::UnitZ()));
    }

    TEST_CASE("angles between lifted rays shrink as theta decreases")
    {
        const DiffractionEdge e = corner();
        const EdgeFan2D fan = precompute_edge_fan(e, 15.0);
        double previous = 1e9;
        for (double theta_deg : {90.0, 70.0, 50.0, 30.0, 10.0}) {
            const double th = deg_to_rad(theta_deg);
            const Vec3 in(std::sin(th), 0.0, std::cos(th));
            const auto set = lift_to_keller_cone(fan, e, in);
            REQUIRE(set);
            const double spacing = angle_between(set->rays[3].direction, set->rays[4].direction);
            CHECK(spacing < previous);
            previous = spacing;
        }
    }

    TEST_CASE("wedges of pi or more are left unbounded")
    {
        const DiffractionEdge e = corner();
        const auto set = lift_to_keller_cone(make_edge_fan(e, 1), e, Vec3::UnitX());
        REQUIRE(set);
        REQUIRE(set->rays.size() == 1);
        CHECK(set->rays[0].sep_normals[0].isZero());
        CHECK(in_wedge(set->rays[0], Vec3(-1, -1, 0)));
    }
}
