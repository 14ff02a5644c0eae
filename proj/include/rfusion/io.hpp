#pragma once

// Plain-text file formats shared by the tools: TUM trajectories, covariance
// sidecars, scan point files and CSV/JSON helpers. Numbers are written with 9
// significant digits, timestamps with 6 decimals.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfusion/pose.hpp"
#include "rfusion/scan_match.hpp"

namespace rfusion::io {

namespace fs = std::filesystem;

std::string fmt9(double v);
std::string fmt_time(double t);
// v rounded to 9 significant digits, so JSON output never carries more.
double round9(double v);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

// `timestamp tx ty tz qx qy qz qw` per line, '#' comments.
std::string format_tum(const Trajectory& traj, const std::string& header = "");
void write_tum(const fs::path& path, const Trajectory& traj, const std::string& header = "");
Trajectory read_tum(const fs::path& path);

// Header `t,c00,c01,...,c55` (upper triangle, row-major); one row per pose.
void write_covariance_csv(const fs::path& path, const Trajectory& traj);
// Attaches covariances by exact timestamp match (after 6-decimal formatting).
void read_covariance_csv(const fs::path& path, Trajectory& traj);

// '#' comments (an optional `# stamp <t>` line carries the timestamp), then
// `count N`, then N lines `x y z`.
void write_scan(const fs::path& path, const ScanFrame& scan);
ScanFrame read_scan(const fs::path& path);
std::string scan_filename(std::size_t index);
std::vector<fs::path> list_scans(const fs::path& dir);

nlohmann::ordered_json transform_json(const Transform& t);
Transform transform_from_json(const nlohmann::json& j);
void write_json(const fs::path& path, const nlohmann::ordered_json& j);
nlohmann::json read_json(const fs::path& path);

}  // namespace rfusion::io
