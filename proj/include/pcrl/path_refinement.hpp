#pragma once

#include "pcrl/coarse_tracer.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pcrl {

struct RefinedInteraction {
    InteractionKind kind = InteractionKind::Reflection;
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ(); ///< refined surface normal (reflection)
    int edge = -1;
    double t = 0.0;
    std::uint32_t label = 0;
};

enum class RefineStatus { Converged, NotConverged, Degenerate, SurfaceMiss, OffEdge, Occluded };

const char* to_string(RefineStatus status);

struct RefinedPath {
    int tx = 0;
    int rx = 0;
    Vec3 tx_position = Vec3::Zero();
    Vec3 rx_position = Vec3::Zero();
    std::vector<RefinedInteraction> interactions;
    double length = 0.0;
    double delay = 0.0; ///< s
    double grad_sq_norm = 0.0;
    int iterations = 0;
    RefineStatus status = RefineStatus::NotConverged;
    bool converged() const { return status == RefineStatus::Converged; }

    /// TX, interaction points, RX.
    std::vector<Vec3> points() const;
};

/// Sum of segment lengths. Throws std::invalid_argument for fewer than two points.
double path_length(const std::vector<Vec3>& points);

/// (I_k - I_prev)/|.| + (I_k - I_next)/|.|, the gradient of f_k with respect to I_k.
/// Empty when I_k coincides with a neighbour.
std::optional<Vec3> local_gradient(const Vec3& prev, const Vec3& cur, const Vec3& next);

/// Components of the local gradient along the tangent basis (reflection) ...
std::optional<Vec2> reflection_gradient(const Vec3& prev, const Vec3& cur, const Vec3& next, const Vec3& u,
                                        const Vec3& v);
/// ... and along the edge direction (diffraction).
std::optional<double> diffraction_gradient(const Vec3& prev, const Vec3& cur, const Vec3& next, const Vec3& w);

inline constexpr double kMinLineSearchStep = 1e-12;

/// Armijo backtracking: starts at gamma = 1 and multiplies by beta while
/// f(x - gamma g) > f(x) + alpha gamma g.(-g). Returns 0 when gamma falls below kMinLineSearchStep.
/// Throws std::invalid_argument for a zero gradient.
double backtracking_search(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& grad, double alpha, double beta);

/// Fermat refinement of one coarse path followed by the visibility validation.
RefinedPath refine_path(const CoarsePath& coarse, const VoxelizedScene& scene, const std::vector<RadioEndpoint>& txs,
                        const SimulationConfig& cfg);

/// Refines all paths in parallel; the output keeps the input order.
std::vector<RefinedPath> refine_paths(const std::vector<CoarsePath>& coarse, const VoxelizedScene& scene,
                                      const std::vector<RadioEndpoint>& txs, const SimulationConfig& cfg);

/// Every segment must be free of surface hits; hits near interaction endpoints are ignored.
bool validate_visibility(const RefinedPath& path, const VoxelizedScene& scene, const SimulationConfig& cfg);

} // namespace pcrl
