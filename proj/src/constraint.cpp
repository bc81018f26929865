#include "dtmnav/constraint.hpp"

#include <cmath>

namespace dtmnav {

namespace {

double checked_denominator(const Vec3& normal, const Vec3& dir) {
    const double d = normal.dot(dir);
    if (!(std::abs(d) > kGrazeEpsilon * normal.norm() * dir.norm())) {
        throw NavError(ErrorCode::GrazingRay, "line of sight grazes the tangent plane");
    }
    return d;
}

}  // namespace

NavState retract(const NavState& s, const StateVector& d) {
    NavState out;
    out.pose1.R = s.pose1.R.perturbed(d.segment<3>(0));
    out.pose1.p = s.pose1.p + d.segment<3>(3);
    out.ego.R12 = s.ego.R12.perturbed(d.segment<3>(6));
    out.ego.p12 = s.ego.p12 + d.segment<3>(9);
    return out;
}

Vec3 world_source(const NavState& state, const LineOfSight& ray1) { return apply_pose(state.pose1, ray1.source); }

LinearizedFeature linearize_feature(const NavState& state, const FeatureCorrespondence& f, const DtmGrid& dtm) {
    const Vec3 ws = world_source(state, f.ray1);
    const Vec3 wq = state.pose1.R * f.ray1.direction;
    const TangentPlane plane = raycast(dtm, ws, wq);
    checked_denominator(plane.normal, wq);
    return {f, plane};
}

double depth_lambda(const NavState& state, const LineOfSight& ray1, const TangentPlane& plane) {
    const Vec3 wq = state.pose1.R * ray1.direction;
    const double den = checked_denominator(plane.normal, wq);
    const Vec3 ws = world_source(state, ray1);
    return (plane.normal.dot(plane.point) - plane.normal.dot(ws)) / den;
}

Vec3 predicted_ground_point(const NavState& state, const LineOfSight& ray1, const TangentPlane& plane) {
    const Vec3 wq = state.pose1.R * ray1.direction;
    const Vec3 ws = world_source(state, ray1);
    return plane.point + projection_operator(wq, plane.normal) * (ws - plane.point);
}

Vec3 transfer_to_second_frame(const NavState& state, const LineOfSight& ray1, const TangentPlane& plane) {
    const Mat3& R12 = state.ego.R12.matrix();
    const Vec3 wq = state.pose1.R * ray1.direction;
    const double den = checked_denominator(plane.normal, wq);
    const Vec3 ws = world_source(state, ray1);
    // depth along q1 from the source to the plane
    const Vec3 l_term = ray1.direction * (plane.normal.dot(plane.point - ws) / den);
    return R12 * ray1.source + state.ego.p12 + R12 * l_term;
}

Vec2 residual(const NavState& state, const LinearizedFeature& f) {
    const LineOfSight& ray2 = f.correspondence.ray2;
    const Vec3 c2g = transfer_to_second_frame(state, f.correspondence.ray1, f.plane);
    return orthogonal_complement_basis(ray2.direction) * (c2g - ray2.source);
}

LinearizationResult linearize_all(const NavState& state, std::span<const FeatureCorrespondence> features,
                                  const DtmGrid& dtm) {
    LinearizationResult out;
    out.features.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        try {
            out.features.push_back(linearize_feature(state, features[i], dtm));
            out.source_index.push_back(i);
        } catch (const NavError& e) {
            out.rejected.push_back({i, e.code()});
        }
    }
    return out;
}

Eigen::VectorXd stack_residuals(const NavState& state, std::span<const LinearizedFeature> features) {
    Eigen::VectorXd r(2 * static_cast<Eigen::Index>(features.size()));
    for (std::size_t i = 0; i < features.size(); ++i) {
        r.segment<2>(2 * static_cast<Eigen::Index>(i)) = residual(state, features[i]);
    }
    return r;
}

Eigen::MatrixXd numeric_jacobian(const NavState& state, std::span<const LinearizedFeature> features,
                                 const JacobianSteps& steps) {
    Eigen::MatrixXd J(2 * static_cast<Eigen::Index>(features.size()), kStateDim);
    for (int j = 0; j < kStateDim; ++j) {
        const bool rotational = (j / 3) % 2 == 0;
        const double h = rotational ? steps.rotation : steps.translation;
        StateVector d = StateVector::Zero();
        d[j] = h;
        const Eigen::VectorXd plus = stack_residuals(retract(state, d), features);
        const Eigen::VectorXd minus = stack_residuals(retract(state, -d), features);
        J.col(j) = (plus - minus) / (2.0 * h);
    }
    return J;
}

Eigen::MatrixXd analytic_jacobian(const NavState& state, std::span<const LinearizedFeature> features) {
    using Row3 = Eigen::RowVector3d;
    const Mat3& R1 = state.pose1.R.matrix();
    const Mat3& R12 = state.ego.R12.matrix();
    Eigen::MatrixXd J(2 * static_cast<Eigen::Index>(features.size()), kStateDim);
    for (std::size_t i = 0; i < features.size(); ++i) {
        const LineOfSight& ray1 = features[i].correspondence.ray1;
        const TangentPlane& plane = features[i].plane;
        const Vec3& n = plane.normal;
        const Vec3 wq = R1 * ray1.direction;
        const double a = checked_denominator(n, wq);
        const double b = n.dot(plane.point - world_source(state, ray1));
        const double s = b / a;

        // R1 Exp(d) x ~ R1 x - R1 [x]x d
        const Row3 da_dtheta = -n.transpose() * R1 * skew(ray1.direction);
        const Row3 db_dtheta = n.transpose() * R1 * skew(ray1.source);
        const Row3 db_dp = -n.transpose();
        const Row3 ds_dtheta = (db_dtheta * a - b * da_dtheta) / (a * a);
        const Row3 ds_dp = db_dp / a;

        const Vec3 r12q = R12 * ray1.direction;
        Eigen::Matrix<double, 3, kStateDim> dv;
        dv.block<3, 3>(0, 0) = r12q * ds_dtheta;
        dv.block<3, 3>(0, 3) = r12q * ds_dp;
        dv.block<3, 3>(0, 6) = -R12 * skew(ray1.source + ray1.direction * s);
        dv.block<3, 3>(0, 9) = Mat3::Identity();
        J.middleRows<2>(2 * static_cast<Eigen::Index>(i)) =
            orthogonal_complement_basis(features[i].correspondence.ray2.direction) * dv;
    }
    return J;
}

StackedSystem stack_residuals_and_jacobian(const NavState& state, std::span<const LinearizedFeature> features,
                                           const DtmGrid& dtm, bool relinearize) {
    StackedSystem out;
    if (relinearize) {
        for (std::size_t i = 0; i < features.size(); ++i) {
            try {
                out.features.push_back(linearize_feature(state, features[i].correspondence, dtm));
                out.source_index.push_back(i);
            } catch (const NavError& e) {
                out.rejected.push_back({i, e.code()});
            }
        }
    } else {
        out.features.assign(features.begin(), features.end());
        for (std::size_t i = 0; i < features.size(); ++i) out.source_index.push_back(i);
    }
    if (out.features.empty()) throw NavError(ErrorCode::AllFeaturesRejected, "no usable features");
    out.residuals = stack_residuals(state, out.features);
    out.jacobian = numeric_jacobian(state, out.features);
    return out;
}

}  // namespace dtmnav
