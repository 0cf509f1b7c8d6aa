#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnas/chain.hpp"
#include "dnas/dataset.hpp"
#include "dnas/supernet.hpp"
#include "dnas/trainer.hpp"

namespace dnas {

// Per-edge samples entering the two-path mixing problem: the skip path
// input x_e, the parametric-path output o_e(x_e), and the target map m*.
struct FeatureSamples {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> x_e;    // (n*d), skip path
    std::vector<double> o_e;    // (n*d), parametric path
    std::vector<double> m_star; // (n*d)

    void validate() const;
};

// Closed-form minimizer of Var(theta*o + (1-theta)*x - m*) subject to the
// weights summing to 1. theta values may leave [0,1] when the covariance
// exceeds a variance; alpha values are defined only while both log
// arguments are positive.
struct ThetaSolution {
    double theta_conv = 0.0;
    double theta_skip = 0.0;
    double alpha_conv = 0.0;
    double alpha_skip = 0.0;
    bool alpha_defined = false;
    bool in_unit_interval = false;
};

ThetaSolution prop1_closed_form(const FeatureSamples& s);

double prop1_objective(const FeatureSamples& s, double theta_conv);

struct GridResult {
    double theta = 0.0;
    double objective = 0.0;
};

// Brute-force sweep of theta over [0,1]; the authority for the constrained
// optimum.
GridResult prop1_grid_oracle(const FeatureSamples& s, double step);

// |d/dtheta difference| of the two stationarity conditions at the solution,
// normalized by the residual scale.
double stationarity_residual(const FeatureSamples& s, const ThetaSolution& t);

// Variance/covariance over flattened entries, unbiased denominator.
double sample_variance(std::span<const double> a);
double sample_covariance(std::span<const double> a, std::span<const double> b);

struct Prop1ProbeRow {
    std::size_t edge = 0;
    double var_skip_resid = 0.0; // Var(x_e - m*)
    double var_conv_resid = 0.0; // Var(o_e - m*)
    double theta_skip_pred = 0.0;
    bool theta_in_unit = false;
    double theta_skip_pred_std = 0.0; // per-array standardized variant
    bool theta_std_in_unit = false;
    double alpha_skip_observed = 0.0; // trained softmax weight of skip
};

// Empirical check of the mixing analysis on a trained two-op supernet; m*
// is proxied by the final intermediate node's mixed output. Report-only.
std::vector<Prop1ProbeRow> supernet_prop1_probe(Supernet& net, const Dataset& ds,
                                                const std::string& split = "val");

struct GapPoint {
    std::size_t epoch = 0;
    double val_accuracy = 0.0;
    double gap = 0.0;
};

struct GapTrajectory {
    std::vector<GapPoint> points;
    std::optional<double> spearman_epoch_gap; // absent when the gap is constant
};

GapTrajectory skip_gap_trajectory(const RunLog& log);

// Tie-adjusted tau-b; absent when either ranking is all ties.
std::optional<double> kendall_tau(std::span<const double> a, std::span<const double> b);
// Average-rank Spearman; absent when either input is constant.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

struct ShuffleReport {
    double baseline_accuracy = 0.0;
    double mean_shuffled = 0.0;
    double std_shuffled = 0.0; // sample std over trials
    std::vector<double> trial_accuracies;
};

ShuffleReport edge_shuffle_robustness(Supernet& net, const Dataset& ds, std::size_t trials,
                                      std::uint64_t seed, const std::string& split = "test");
ShuffleReport edge_shuffle_robustness(ChainNet& net, const Dataset& ds, std::size_t trials,
                                      std::uint64_t seed, const std::string& split = "test");

struct AlphaStrengthRow {
    std::size_t edge = 0;
    std::vector<std::string> ops;
    std::vector<double> alpha_weight; // softmax alpha per op
    std::vector<double> strength;     // discretization accuracy at convergence
    std::optional<double> kendall;    // absent when all tied
};

std::vector<AlphaStrengthRow> alpha_vs_strength_report(const Supernet& net, const Dataset& ds,
                                                       const TrainConfig& cfg,
                                                       const std::vector<std::size_t>& edges);

} // namespace dnas
