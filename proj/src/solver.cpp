#include "dtmnav/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace dtmnav {

namespace {

using Mat12 = Eigen::Matrix<double, kStateDim, kStateDim>;

// Relative cost change treated as no progress.
constexpr double kStallFraction = 1e-12;

struct Evaluation {
    Eigen::VectorXd residuals;
    std::vector<double> norms;
    double cost = 0.0;
    double rms = 0.0;
};

Evaluation evaluate(const NavState& state, std::span<const LinearizedFeature> features, double k) {
    Evaluation ev;
    ev.residuals = stack_residuals(state, features);
    ev.norms.resize(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        ev.norms[i] = ev.residuals.segment<2>(2 * static_cast<Eigen::Index>(i)).norm();
        ev.cost += huber_cost(ev.norms[i], k);
    }
    ev.rms = features.empty() ? 0.0 : std::sqrt(ev.residuals.squaredNorm() / static_cast<double>(ev.residuals.size()));
    return ev;
}

/// Re-linearizes at `state`; a feature whose raycast fails keeps its previous
/// tangent plane so the feature set stays fixed for cost comparisons.
std::vector<LinearizedFeature> refresh_planes(const NavState& state, std::span<const LinearizedFeature> features,
                                              const DtmGrid& dtm) {
    std::vector<LinearizedFeature> out(features.begin(), features.end());
    for (LinearizedFeature& f : out) {
        try {
            f = linearize_feature(state, f.correspondence, dtm);
        } catch (const NavError&) {
        }
    }
    return out;
}

void record_conditioning(SolverReport& report, const Conditioning& c, const SolverConfig& cfg) {
    report.condition = c.condition;
    report.singular_values = c.singular_values;
    report.rank = c.rank;
    report.rank_deficient = c.rank < kStateDim;
    report.ill_conditioned = !(c.condition <= cfg.condition_warn);
}

}  // namespace

void validate(const SolverConfig& cfg) {
    const bool ok = cfg.max_iterations >= 1 && cfg.step_tolerance > 0 && cfg.residual_tolerance > 0 &&
                    cfg.initial_damping >= 0 && cfg.damping_growth > 1 && cfg.damping_shrink > 0 &&
                    cfg.damping_shrink < 1 && cfg.huber_k >= 0 && cfg.condition_warn > 0 &&
                    cfg.rank_tolerance > 0 && cfg.max_escalations >= 1;
    if (!ok) throw NavError(ErrorCode::InvalidArgument, "solver configuration out of range");
}

Conditioning conditioning_report(const Eigen::MatrixXd& J, double rank_tolerance) {
    Conditioning c;
    if (J.cols() != kStateDim) throw NavError(ErrorCode::InvalidArgument, "Jacobian must have 12 columns");
    if (J.rows() > 0) {
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
        const Eigen::VectorXd s = svd.singularValues();
        for (Eigen::Index i = 0; i < s.size() && i < kStateDim; ++i) c.singular_values[i] = s[i];
    }
    const double smax = c.singular_values[0];
    const double smin = c.singular_values[kStateDim - 1];
    c.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    for (int i = 0; i < kStateDim; ++i) {
        if (smax > 0.0 && c.singular_values[i] > rank_tolerance * smax) ++c.rank;
    }
    return c;
}

double huber_weight(double r_norm, double k) {
    if (k <= 0.0 || r_norm <= k) return 1.0;
    return k / r_norm;
}

double huber_cost(double r_norm, double k) {
    if (k <= 0.0 || r_norm <= k) return 0.5 * r_norm * r_norm;
    return k * r_norm - 0.5 * k * k;
}

SolveResult solve(std::span<const FeatureCorrespondence> features, const DtmGrid& dtm, const NavState& initial,
                  const SolverConfig& cfg) {
    validate(cfg);
    SolverReport report;
    const double k = cfg.huber_k;

    LinearizationResult lin = linearize_all(initial, features, dtm);
    report.rejected = lin.rejected;
    report.used_features = lin.features.size();
    if (lin.features.empty()) {
        throw EstimationError(ErrorCode::TooFewFeatures, "no feature survived linearization", report);
    }

    NavState state = initial;
    std::vector<LinearizedFeature> feats = std::move(lin.features);
    Evaluation current;
    double mu = cfg.initial_damping;
    int escalations = 0;

    auto fail = [&](ErrorCode code, const std::string& what) {
        report.final_rms = current.rms;
        report.final_cost = current.cost;
        report.final_damping = mu;
        throw EstimationError(code, what, report);
    };

    for (int iter = 0;; ++iter) {
        // tangent planes are refreshed once per iteration and held fixed while
        // the damping loop searches for a decrease
        if (iter > 0 && cfg.relinearize) feats = refresh_planes(state, feats, dtm);
        current = evaluate(state, feats, k);
        report.iterations = iter;
        report.cost_history.push_back(current.cost);
        report.rms_history.push_back(current.rms);

        const Eigen::MatrixXd J = cfg.jacobian == JacobianMode::Analytic ? analytic_jacobian(state, feats)
                                                                         : numeric_jacobian(state, feats);
        Eigen::VectorXd sqrt_w(J.rows());
        for (std::size_t i = 0; i < feats.size(); ++i) {
            const double w = std::sqrt(huber_weight(current.norms[i], k));
            sqrt_w.segment<2>(2 * static_cast<Eigen::Index>(i)).setConstant(w);
        }
        const Eigen::MatrixXd WJ = sqrt_w.asDiagonal() * J;
        record_conditioning(report, conditioning_report(WJ, cfg.rank_tolerance), cfg);
        if (feats.size() < cfg.min_features) {
            fail(report.rank_deficient ? ErrorCode::RankDeficient : ErrorCode::TooFewFeatures,
                 std::to_string(feats.size()) + " usable features, need " + std::to_string(cfg.min_features));
        }
        // a state satisfying every constraint is accepted even when the
        // geometry leaves directions unobservable; the report carries the flag
        if (current.rms < cfg.residual_tolerance) {
            report.converged = true;
            report.termination = "residual_tolerance";
            break;
        }
        if (report.rank_deficient) {
            fail(ErrorCode::RankDeficient, "effective Jacobian rank " + std::to_string(report.rank) + " < 12");
        }
        if (iter >= cfg.max_iterations) {
            report.termination = "max_iterations";
            break;
        }

        const Mat12 H = WJ.transpose() * WJ;
        const StateVector g = WJ.transpose() * (sqrt_w.asDiagonal() * current.residuals);

        bool stop = false;
        for (;;) {
            const Mat12 A = H + mu * Mat12::Identity();
            const StateVector delta = A.ldlt().solve(-g);
            if (!delta.allFinite()) fail(ErrorCode::DivergenceDetected, "non-finite step");
            const bool tiny = delta.cwiseAbs().maxCoeff() < cfg.step_tolerance;

            const NavState trial = retract(state, delta);
            Evaluation next;
            bool valid = true;
            try {
                next = evaluate(trial, feats, k);
                valid = std::isfinite(next.cost);
            } catch (const NavError&) {
                valid = false;  // a ray turned parallel to its tangent plane
            }

            if (valid && next.cost < current.cost) {
                report.accepted_steps.push_back({current.cost, next.cost});
                const double gain = current.cost - next.cost;
                state = trial;
                current = std::move(next);
                mu *= cfg.damping_shrink;
                escalations = 0;
                if (tiny || gain <= kStallFraction * current.cost) {
                    report.converged = true;
                    report.termination = tiny ? "step_tolerance" : "cost_stalled";
                    stop = true;
                }
                break;
            }

            // predicted decrease of the local quadratic model
            const double predicted = -(g.dot(delta) + 0.5 * delta.dot(H * delta));
            if (tiny || predicted <= kStallFraction * current.cost) {
                report.converged = true;
                report.termination = tiny ? "step_tolerance" : "no_further_decrease";
                stop = true;
                break;
            }
            mu = std::max(mu, 1e-12) * cfg.damping_growth;
            if (++escalations >= cfg.max_escalations) {
                fail(ErrorCode::DivergenceDetected,
                     "cost did not decrease over " + std::to_string(escalations) + " damping increases");
            }
        }
        if (stop) {
            report.iterations = iter + 1;
            report.cost_history.push_back(current.cost);
            report.rms_history.push_back(current.rms);
            break;
        }
    }

    report.final_rms = current.rms;
    report.final_cost = current.cost;
    report.final_damping = mu;
    report.used_features = feats.size();
    return {state, report};
}

}  // namespace dtmnav
