#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dtmnav/constraint.hpp"
#include "dtmnav/format.hpp"

namespace dtmnav {

enum class JacobianMode { Numeric, Analytic };

struct SolverConfig {
    int max_iterations = 50;
    /// Max-abs step (length units / rad) below which iteration stops.
    double step_tolerance = 1e-10;
    /// Residual RMS (length units) below which iteration stops.
    double residual_tolerance = 1e-10;
    double initial_damping = 1e-4;
    double damping_growth = 10.0;
    double damping_shrink = 0.5;
    /// Huber threshold on the per-feature residual norm; 0 disables it.
    double huber_k = 0.0;
    bool relinearize = true;
    /// Analytic by default: finite-difference rounding noise limits how far
    /// ill-conditioned directions converge.
    JacobianMode jacobian = JacobianMode::Analytic;
    std::size_t min_features = 6;
    double condition_warn = 1e8;
    /// Singular values below rank_tolerance * sigma_max count as zero.
    double rank_tolerance = 1e-10;
    /// Consecutive rejected steps (each raising the damping) tolerated.
    int max_escalations = 8;
};

/// Throws InvalidArgument when a field is out of range.
void validate(const SolverConfig& cfg);

struct Conditioning {
    double condition = 0.0;
    StateVector singular_values = StateVector::Zero();
    int rank = 0;
};

/// sigma_max / sigma_min of J and its 12 singular values (descending; zero
/// padded when J has fewer than 12 rows).
Conditioning conditioning_report(const Eigen::MatrixXd& J, double rank_tolerance = 1e-10);

/// Huber IRLS weight: 1 for r <= k, k / r beyond.
double huber_weight(double r_norm, double k);

/// Huber loss on a residual norm (plain half-square when k == 0).
double huber_cost(double r_norm, double k);

struct SolverReport {
    bool converged = false;
    int iterations = 0;
    std::string termination;
    double final_rms = 0.0;
    double final_cost = 0.0;
    /// Robust cost at the start of every iteration (after the tangent planes
    /// are refreshed), plus the final value.
    std::vector<double> cost_history;
    std::vector<double> rms_history;
    double condition = 0.0;
    StateVector singular_values = StateVector::Zero();
    int rank = 0;
    bool rank_deficient = false;
    bool ill_conditioned = false;
    std::size_t used_features = 0;
    std::vector<Rejection> rejected;
    double final_damping = 0.0;
    /// (before, after) cost of each accepted step, under the tangent planes
    /// the step was computed with.
    std::vector<std::pair<double, double>> accepted_steps;
};

/// Estimation failure carrying the diagnostics gathered up to that point.
class EstimationError : public NavError {
public:
    EstimationError(ErrorCode code, const std::string& what, SolverReport report)
        : NavError(code, what), report_(std::move(report)) {}
    const SolverReport& report() const { return report_; }

private:
    SolverReport report_;
};

struct SolveResult {
    NavState state;
    SolverReport report;
};

/// Damped Gauss-Newton over the 12-parameter state, minimising the Huber cost
/// of the stacked constraint residuals. With cfg.relinearize the tangent
/// planes are recomputed at the start of every iteration; otherwise they stay
/// at the initial guess. Throws EstimationError with
/// RankDeficient, TooFewFeatures or DivergenceDetected.
SolveResult solve(std::span<const FeatureCorrespondence> features, const DtmGrid& dtm, const NavState& initial,
                  const SolverConfig& cfg = {});

/// NavState as key-value text: pose1/pose2 position and quaternion records
/// plus the ego-motion quaternion and translation. Parsing needs pose1 and
/// either the ego records or pose2.
std::string format_state(const NavState& state);
NavState parse_state(const std::string& text);

/// Report as key-value text; `status` is "ok" or the failure code.
std::string format_report(const SolverReport& report, const std::string& status);

/// Applies `solver.*` keys (the names printed by format_solver_config).
void apply_solver_config(SolverConfig& cfg, const KeyValueFile& kv);
std::string format_solver_config(const SolverConfig& cfg);

}  // namespace dtmnav
