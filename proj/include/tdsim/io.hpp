#pragma once

#include <string>

#include "tdsim/history.hpp"
#include "tdsim/krasovskii.hpp"
#include "tdsim/sampling.hpp"

namespace tdsim {

/// 17 significant digits: round-trips doubles exactly, so identical data
/// serializes to identical bytes and determinism checks can diff files.
std::string format_double(double v);

/// Segment CSV: header "theta,v1..vn", one row per knot. The delay is
/// implied by the first knot (always -delay).
void write_segment_csv(const Segment& seg, const std::string& path);
Segment read_segment_csv(const std::string& path);

/// Trajectory CSV: header "t,x1..xn"; rows with t < 0 carry the initial
/// segment, rows with t >= 0 the recorded states (t = 0 serves as both).
/// The sidecar JSON holds {"delay":..., "dim":...}.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
void write_trajectory_meta(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(const std::string& csv_path, const std::string& meta_path);

/// SampledRun export: <prefix>plant.csv, <prefix>observer.csv
/// (rows t_j, xhat1..xhatn), <prefix>partition.csv (rows j, t_j).
void write_sampled_run_csv(const SampledRun& run, const std::string& dir,
                           const std::string& prefix);

/// CheckReport as a JSON string (stable key order, no timestamps).
std::string check_report_json(const CheckReport& report);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace tdsim
