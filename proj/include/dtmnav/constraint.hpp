#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dtmnav/errors.hpp"
#include "dtmnav/sensors.hpp"
#include "dtmnav/terrain.hpp"

namespace dtmnav {

/// One ground feature seen at t1 (ray1, frame C1) and t2 (ray2, frame C2).
struct FeatureCorrespondence {
    LineOfSight ray1;
    LineOfSight ray2;
};

/// The twelve unknowns: pose at t1 and ego-motion t1 -> t2.
struct NavState {
    Pose pose1;
    EgoMotion ego;
};

inline constexpr int kStateDim = 12;
using StateVector = Eigen::Matrix<double, kStateDim, 1>;

/// Applies a local increment ordered [dtheta1, dp1, dtheta12, dp12]; rotation
/// increments are right-multiplied axis-angle vectors.
NavState retract(const NavState& state, const StateVector& delta);

/// Feature with the DTM tangent plane at its estimated ground point.
struct LinearizedFeature {
    FeatureCorrespondence correspondence;
    TangentPlane plane;
};

/// World position of ray1's source, R1 * cS1 + p1.
Vec3 world_source(const NavState& state, const LineOfSight& ray1);

/// Intersects ray1 (moved to the world by pose1) with the DTM. Throws
/// NoIntersection / StartsBelowTerrain / NoDataCell, or GrazingRay when
/// |N . R1 q1| <= kGrazeEpsilon.
LinearizedFeature linearize_feature(const NavState& state, const FeatureCorrespondence& f, const DtmGrid& dtm);

/// Distance along R1 q1 from the world source to the tangent plane.
double depth_lambda(const NavState& state, const LineOfSight& ray1, const TangentPlane& plane);

/// g + P(R1 q1, n) (wS1 - g), with g the plane point and n its normal: the
/// ray's intersection with the plane.
Vec3 predicted_ground_point(const NavState& state, const LineOfSight& ray1, const TangentPlane& plane);

/// Predicted ground point in frame C2:
/// R12 cS1 + p12 + R12 q1 (n . (g - wS1)) / (n . R1 q1).
Vec3 transfer_to_second_frame(const NavState& state, const LineOfSight& ray1, const TangentPlane& plane);

/// B(q2) [c2G - cS2], with B the 2x3 orthonormal complement of q2. Zero when
/// the state is exact and the terrain is planar around the feature.
Vec2 residual(const NavState& state, const LinearizedFeature& f);

struct Rejection {
    std::size_t feature = 0;
    ErrorCode reason = ErrorCode::NoIntersection;
};

struct LinearizationResult {
    std::vector<LinearizedFeature> features;
    /// Index into the input for each entry of `features`.
    std::vector<std::size_t> source_index;
    std::vector<Rejection> rejected;
};

/// Linearizes every correspondence, collecting the ones that fail instead of
/// throwing.
LinearizationResult linearize_all(const NavState& state, std::span<const FeatureCorrespondence> features,
                                  const DtmGrid& dtm);

/// Residuals stacked feature-major, two rows per feature.
Eigen::VectorXd stack_residuals(const NavState& state, std::span<const LinearizedFeature> features);

struct JacobianSteps {
    double rotation = 1e-6;
    double translation = 1e-6;
};

/// Central finite differences over the 12 local parameters with tangent
/// planes held fixed.
Eigen::MatrixXd numeric_jacobian(const NavState& state, std::span<const LinearizedFeature> features,
                                 const JacobianSteps& steps = {});

/// Closed-form derivative of the residuals over the same 12 local
/// parameters, tangent planes held fixed.
Eigen::MatrixXd analytic_jacobian(const NavState& state, std::span<const LinearizedFeature> features);

struct StackedSystem {
    Eigen::VectorXd residuals;
    Eigen::MatrixXd jacobian;
    /// Features actually stacked (re-linearized when requested).
    std::vector<LinearizedFeature> features;
    std::vector<std::size_t> source_index;
    std::vector<Rejection> rejected;
};

/// Residual vector (2n) and Jacobian (2n x 12). With `relinearize`, tangent
/// planes are recomputed by raycasting at `state` before differentiating; features
/// that fail are reported as rejected. Throws AllFeaturesRejected when none
/// survive.
StackedSystem stack_residuals_and_jacobian(const NavState& state, std::span<const LinearizedFeature> features,
                                           const DtmGrid& dtm, bool relinearize);

/// Correspondence CSV: header `s1x,s1y,s1z,q1x,q1y,q1z,s2x,s2y,s2z,q2x,q2y,q2z`
/// then one feature per line. Directions are normalized on load; errors
/// are ParseError naming the line.
std::string format_correspondences(std::span<const FeatureCorrespondence> features);
std::vector<FeatureCorrespondence> parse_correspondences(const std::string& text);

}  // namespace dtmnav
