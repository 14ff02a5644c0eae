#include "rfusion/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "rfusion/errors.hpp"

namespace rfusion::io {

namespace {

bool is_comment_or_blank(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

Eigen::Quaterniond canonical(const Eigen::Quaterniond& q) {
  Eigen::Quaterniond c = q.normalized();
  if (c.w() < 0.0) c.coeffs() = -c.coeffs();
  return c;
}

double round9_local(double v) { return v == 0.0 ? 0.0 : std::stod(fmt9(v)); }

// Rounded (x, y, z, w) that reads back, after normalization, to a rotation
// printing the same digits. Plain rounding is off by one in the last digit
// for about 1% of poses, which breaks byte-identical pass-through files.
Eigen::Vector4d printable_quaternion(const Eigen::Quaterniond& rotation) {
  const Eigen::Quaterniond q = canonical(rotation);
  const auto rounded = [](const Eigen::Vector4d& v) {
    return Eigen::Vector4d(round9_local(v[0]), round9_local(v[1]), round9_local(v[2]), round9_local(v[3]));
  };
  const auto stable = [&](const Eigen::Vector4d& c) {
    const Eigen::Quaterniond back(c[3], c[0], c[1], c[2]);
    const Eigen::Quaterniond again = canonical(Transform::from_quaternion(back, Vec3::Zero()).quaternion());
    return rounded(again.coeffs()) == c;
  };
  const Eigen::Vector4d base = rounded(q.coeffs());
  if (stable(base)) return base;
  Eigen::Vector4d step;
  for (int i = 0; i < 4; ++i) {
    step[i] = base[i] == 0.0 ? 0.0 : std::pow(10.0, std::floor(std::log10(std::abs(base[i]))) - 8.0);
  }
  // Smallest total adjustment first, up to two last-digit steps per component.
  for (int budget = 1; budget <= 8; ++budget) {
    for (int a = -2; a <= 2; ++a)
      for (int b = -2; b <= 2; ++b)
        for (int c = -2; c <= 2; ++c)
          for (int d = -2; d <= 2; ++d) {
            if (std::abs(a) + std::abs(b) + std::abs(c) + std::abs(d) != budget) continue;
            const Eigen::Vector4d cand =
                rounded(base + Eigen::Vector4d(a * step[0], b * step[1], c * step[2], d * step[3]));
            if (stable(cand)) return cand;
          }
  }
  return base;
}

}  // namespace

std::string fmt9(double v) {
  if (v == 0.0) return "0";  // also folds -0
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string fmt_time(double t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", t);
  return buf;
}

double round9(double v) {
  if (!std::isfinite(v)) return v;
  return std::stod(fmt9(v));
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw DataError(path.string(), "write failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_tum(const Trajectory& traj, const std::string& header) {
  std::string out;
  if (!header.empty()) out += "# " + header + "\n";
  out += "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& p : traj) {
    const Vec3& t = p.pose.translation();
    const Eigen::Vector4d q = printable_quaternion(p.pose.quaternion());
    out += fmt_time(p.t) + ' ' + fmt9(t.x()) + ' ' + fmt9(t.y()) + ' ' + fmt9(t.z()) + ' ' + fmt9(q[0]) + ' ' +
           fmt9(q[1]) + ' ' + fmt9(q[2]) + ' ' + fmt9(q[3]) + '\n';
  }
  return out;
}

void write_tum(const fs::path& path, const Trajectory& traj, const std::string& header) {
  write_text(path, format_tum(traj, header));
}

Trajectory read_tum(const fs::path& path) {
  std::istringstream in(read_text(path));
  Trajectory traj;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_comment_or_blank(line)) continue;
    std::istringstream fields(line);
    double v[8];
    for (double& x : v) {
      if (!(fields >> x)) throw DataError(path.string(), "line " + std::to_string(lineno) + ": expected 8 numbers");
    }
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (!(q.norm() > 0.5)) throw DataError(path.string(), "line " + std::to_string(lineno) + ": bad quaternion");
    if (!traj.empty() && !(v[0] > traj.back().t)) {
      throw DataError(path.string(), "line " + std::to_string(lineno) + ": timestamps not strictly increasing");
    }
    traj.push_back({v[0], Transform::from_quaternion(q, Vec3(v[1], v[2], v[3])), std::nullopt});
  }
  return traj;
}

void write_covariance_csv(const fs::path& path, const Trajectory& traj) {
  std::string out = "t";
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) out += ",c" + std::to_string(i) + std::to_string(j);
  out += '\n';
  for (const auto& p : traj) {
    if (!p.covariance) continue;
    out += fmt_time(p.t);
    for (int i = 0; i < 6; ++i)
      for (int j = i; j < 6; ++j) out += ',' + fmt9((*p.covariance)(i, j));
    out += '\n';
  }
  write_text(path, out);
}

void read_covariance_csv(const fs::path& path, Trajectory& traj) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);  // header
  std::map<std::string, Covariance6> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_comment_or_blank(line)) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    std::string stamp;
    fields >> stamp;
    Covariance6 c;
    for (int i = 0; i < 6; ++i)
      for (int j = i; j < 6; ++j) {
        if (!(fields >> c(i, j))) throw DataError(path.string(), "line " + std::to_string(lineno) + ": expected 21 entries");
        c(j, i) = c(i, j);
      }
    rows[fmt_time(std::stod(stamp))] = c;
  }
  for (auto& p : traj) {
    const auto it = rows.find(fmt_time(p.t));
    if (it != rows.end()) p.covariance = it->second;
  }
}

std::string scan_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scan_%06zu.xyz", index);
  return buf;
}

void write_scan(const fs::path& path, const ScanFrame& scan) {
  std::string out = "# stamp " + fmt_time(scan.timestamp) + "\n";
  out += "count " + std::to_string(scan.points.size()) + "\n";
  for (const auto& p : scan.points) out += fmt9(p.x()) + ' ' + fmt9(p.y()) + ' ' + fmt9(p.z()) + '\n';
  write_text(path, out);
}

ScanFrame read_scan(const fs::path& path) {
  std::istringstream in(read_text(path));
  ScanFrame scan;
  std::string line;
  long long expected = -1;
  while (std::getline(in, line)) {
    if (is_comment_or_blank(line)) {
      const auto pos = line.find("# stamp ");
      if (pos != std::string::npos) scan.timestamp = std::stod(line.substr(pos + 8));
      continue;
    }
    std::istringstream fields(line);
    if (expected < 0) {
      std::string word;
      if (!(fields >> word >> expected) || word != "count" || expected < 0) {
        throw DataError(path.string(), "expected `count N` header");
      }
      scan.points.reserve(static_cast<std::size_t>(expected));
      continue;
    }
    Vec3 p;
    if (!(fields >> p.x() >> p.y() >> p.z()) || !p.allFinite()) {
      throw DataError(path.string(), "malformed point line");
    }
    scan.points.push_back(p);
  }
  if (expected < 0) throw DataError(path.string(), "missing `count N` header");
  if (static_cast<long long>(scan.points.size()) != expected) {
    throw DataError(path.string(), "point count does not match header");
  }
  return scan;
}

std::vector<fs::path> list_scans(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(dir.string(), "scan directory not found");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("scan_") && name.ends_with(".xyz")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

nlohmann::ordered_json transform_json(const Transform& t) {
  const Eigen::Vector4d q = printable_quaternion(t.quaternion());
  nlohmann::ordered_json j;
  j["translation"] = {round9(t.translation().x()), round9(t.translation().y()), round9(t.translation().z())};
  j["quaternion"] = {q[0], q[1], q[2], q[3]};
  return j;
}

Transform transform_from_json(const nlohmann::json& j) {
  const auto& tr = j.at("translation");
  const auto& q = j.at("quaternion");
  return Transform::from_quaternion(
      Eigen::Quaterniond(q.at(3).get<double>(), q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>()),
      Vec3(tr.at(0).get<double>(), tr.at(1).get<double>(), tr.at(2).get<double>()));
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string(), e.what());
  }
}

}  // namespace rfusion::io
