#include <stdexcept>

#include "rfusion/errors.hpp"
#include "rfusion/io.hpp"
#include "rfusion/scenario.hpp"

namespace rfusion::sim {

namespace fs = std::filesystem;

void write_scenario(const Scenario& s, const fs::path& dir) {
  s.validate();
  const World world = build_world(s);
  const Trajectory gt = gen_trajectory(s);
  const Trajectory lio = synth_odometry(gt, Subsystem::kLio, s);
  const Trajectory vio = synth_odometry(gt, Subsystem::kVio, s);

  std::error_code ec;
  fs::create_directories(dir / "scans", ec);
  if (ec) throw DataError((dir / "scans").string(), ec.message());
  // Stale scans from an earlier, longer run would break the file count.
  for (const auto& old : io::list_scans(dir / "scans")) fs::remove(old, ec);

  io::write_tum(dir / "gt.tum", gt, "ground truth, LIO frame");
  io::write_tum(dir / "lio.tum", lio, "LIO odometry");
  io::write_tum(dir / "vio.tum", vio, "VIO odometry, VIO frame");
  io::write_covariance_csv(dir / "lio.cov.csv", lio);
  io::write_covariance_csv(dir / "vio.cov.csv", vio);
  io::write_json(dir / "schedule.json", schedule_json(s.schedule));
  io::write_json(dir / "scenario.json", to_json(s));

  const auto n = static_cast<long long>(s.scan_count());
  std::string failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (long long i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      io::write_scan(dir / "scans" / io::scan_filename(idx), synth_scenario_scan(s, world, idx));
    } catch (const std::exception& e) {
#pragma omp critical(rfusion_scan_write)
      if (failure.empty()) failure = e.what();
    }
  }
  if (!failure.empty()) throw DataError((dir / "scans").string(), failure);
}

ScenarioData read_scenario(const fs::path& dir) {
  ScenarioData data;
  const fs::path config = dir / "scenario.json";
  try {
    data.scenario = scenario_from_json(io::read_json(config));
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(config.string(), e.what());
  }
  data.gt = io::read_tum(dir / "gt.tum");
  data.lio = io::read_tum(dir / "lio.tum");
  data.vio = io::read_tum(dir / "vio.tum");
  io::read_covariance_csv(dir / "lio.cov.csv", data.lio);
  io::read_covariance_csv(dir / "vio.cov.csv", data.vio);
  data.scan_dir = dir / "scans";
  if (!fs::is_directory(data.scan_dir)) throw DataError(data.scan_dir.string(), "scan directory not found");
  return data;
}

}  // namespace rfusion::sim
