#pragma once

// Post-hoc summaries of recorded trials: trimming, per-trial medians,
// per-rate aggregation, histograms and plot files.

#include "coadapt/game.hpp"
#include "coadapt/protocol.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace coadapt {

/// Parses the export CSV. Trials are keyed by (pubkey, trial_index) and
/// returned in order of first appearance; session ids are not part of the
/// export and come back empty. Throws std::invalid_argument on bad input.
std::vector<TrialRecord> read_export_csv(std::istream& in);
std::vector<TrialRecord> read_export_csv(const std::filesystem::path& path);

/// Keeps samples with t >= t_end - seconds, where t_end is one sample
/// period past the last sample. A trial of n samples at rate f therefore
/// keeps round(seconds * f) of them.
TrialRecord trim_last_seconds(const TrialRecord& trial, double seconds);

/// Maps h back to the unmirrored frame (signs are their own inverse).
TrialRecord unmirror(const TrialRecord& trial);

/// n equal bins over [lo, hi].
std::vector<double> uniform_bin_edges(int bins = 40, double lo = -1.0, double hi = 1.0);

/// Half-open bins [e_i, e_{i+1}) except the last, which is closed. Values
/// outside the edges are not counted.
std::vector<std::size_t> histogram(const std::vector<double>& values,
                                   const std::vector<double>& edges);

struct Quartiles {
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
};

Quartiles quartiles(const std::vector<double>& values);

struct TrialMedians {
  std::string participant_key;
  int trial_index = 0;
  double alpha = 0.0;
  Vector h;
  Vector m;
  double cost_H = 0.0;
  double cost_M = 0.0;
};

TrialMedians trial_medians(const TrialRecord& trial);

struct AlphaSummary {
  double alpha = 0.0;
  std::size_t trials = 0;
  std::size_t samples = 0;
  Vector median_h;  // median over trials of the per-trial medians
  Vector median_m;
  Quartiles cost_H;
  Quartiles cost_M;
  // One count vector per dimension over SummaryStats::bin_edges.
  std::vector<std::vector<std::size_t>> hist_h;
  std::vector<std::vector<std::size_t>> hist_m;
  double dist_h_ne = 0.0;
  double dist_h_se = 0.0;
  double dist_m_ne = 0.0;
  double dist_m_se = 0.0;
  std::vector<TrialMedians> per_trial;
};

enum class CostStatistic {
  kTrialMedian,  // quartiles of the per-trial median costs
  kPerSample,    // quartiles of all pooled samples
};

struct SummaryOptions {
  CostStatistic cost_statistic = CostStatistic::kTrialMedian;
  std::vector<double> bin_edges = uniform_bin_edges();
};

struct SummaryStats {
  int d_H = 0;
  int d_M = 0;
  EquilibriumSet equilibria;
  std::vector<double> bin_edges;
  std::vector<AlphaSummary> per_alpha;  // ascending alpha
};

/// Expects trimmed, unmirrored trials of one game. Throws
/// std::invalid_argument when dimensions disagree with each other or with
/// the equilibria, or when a trial has no samples.
SummaryStats summarize(const std::vector<TrialRecord>& trials,
                       const EquilibriumSet& equilibria,
                       const SummaryOptions& options = {});

/// trim_last_seconds, unmirror, summarize.
SummaryStats analyze_trials(const std::vector<TrialRecord>& trials,
                            const EquilibriumSet& equilibria,
                            double seconds = 5.0,
                            const SummaryOptions& options = {});

/// Writes actions_median_{alpha}.csv, costs_box.csv, hist_{H,M}_{alpha}.csv
/// and SVG figures. Returns the written paths in write order. Throws
/// std::invalid_argument on empty stats, std::runtime_error on I/O errors.
std::vector<std::filesystem::path> emit_plots(const SummaryStats& stats,
                                              const std::filesystem::path& out_dir);

}  // namespace coadapt
