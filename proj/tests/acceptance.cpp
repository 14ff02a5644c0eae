// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rfusion/degeneracy.hpp"
#include "rfusion/frame_align.hpp"
#include "rfusion/io.hpp"
#include "rfusion/rng.hpp"
#include "rfusion/scan_match.hpp"
#include "rfusion/scenario.hpp"
#include "rfusion/se3.hpp"
#include "rfusion/supervisor.hpp"
#include "rfusion/traj_eval.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace rfusion;
using rfusion::testing::random_transform;
using rfusion::testing::random_unit;
using rfusion::testing::transform_distance;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
const fs::path kRoot = fs::temp_directory_path() / "rfusion_acceptance";

struct Outcome {
  bool pass = true;
  std::string detail;

  // Records a named sub-check; detail lists the failing ones first.
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail = "FAILED " + what + (detail.empty() ? "" : "; " + detail);
    } else {
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

std::vector<Interval> lio_windows(const sim::Scenario& s) {
  std::vector<Interval> out;
  for (const auto& w : s.schedule) {
    if (w.subsystem == sim::Subsystem::kLio) out.push_back({w.t_start, w.t_end});
  }
  return out;
}

bool inside(const std::vector<Interval>& ivs, double t) {
  return std::any_of(ivs.begin(), ivs.end(), [t](const Interval& iv) { return t >= iv.t_start && t < iv.t_end; });
}

// ---- shared corridor run ---------------------------------------------------

struct CorridorRun {
  OfflineResult offline;
  double seconds = 0.0;
};

const CorridorRun& corridor() {
  static const CorridorRun run = [] {
    CorridorRun r;
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = kRoot / "corridor01";
    fs::remove_all(dir);
    sim::write_scenario(sim::named_scenario("corridor01-synth"), dir);
    r.offline = run_offline(dir, OfflineConfig{});
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

// ---- criteria --------------------------------------------------------------

Outcome switching_beats_lio() {
  Outcome o;
  const auto& run = corridor();
  const auto& d = run.offline.data;
  const double fused = ate_rmse(run.offline.fusion.trajectory(), d.gt, AlignmentMode::kRigid);
  const double lio = ate_rmse(d.lio, d.gt, AlignmentMode::kRigid);
  o.check(fused <= 0.5 * lio, fmt::format("ATE fused {:.4f} m vs lio-only {:.4f} m (ratio {:.3f} <= 0.5)", fused, lio,
                                          fused / lio));
  o.check(run.seconds < 60.0, fmt::format("simulate + detector-driven fuse {:.1f} s < 60 s", run.seconds));
  return o;
}

Outcome detector_fidelity() {
  Outcome o;
  const auto& run = corridor();
  const auto eps = episodes(run.offline.health);
  const double iou = interval_iou(eps, lio_windows(run.offline.data.scenario));
  o.check(iou >= 0.8, fmt::format("{} episodes, IoU {:.3f} >= 0.8", eps.size(), iou));

  const sim::Scenario clean = sim::named_scenario("corridor01-synth-clean");
  const auto health = detect(sim::synth_scans(clean, sim::build_world(clean)), DetectorConfig{}, IcpParams{});
  o.check(episodes(health).empty(), fmt::format("clean variant: {} episodes", episodes(health).size()));
  return o;
}

// lio_k = exp(noise) * truth * vio_k, a fraction of pairs corrupted.
std::pair<Transform, std::vector<PosePair>> make_window(Rng& rng, int k, double ts, double rs, double outliers) {
  const Transform truth = random_transform(rng, 3.0, 10.0);
  Covariance6 sigma = Covariance6::Identity();
  if (ts > 0) sigma.diagonal() << Vec3::Constant(ts * ts), Vec3::Constant(rs * rs);
  std::vector<PosePair> w;
  for (int i = 0; i < k; ++i) {
    PosePair p;
    p.t = 0.1 * i;
    p.vio = random_transform(rng, 3.0, 20.0);
    p.lio = truth * p.vio;
    if (ts > 0) p.lio = exp_se3({rng.normal3(ts), rng.normal3(rs)}) * p.lio;
    p.sigma = sigma;
    w.push_back(p);
  }
  const int n_out = static_cast<int>(std::lround(outliers * k));
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  for (int i = 0; i < n_out; ++i) {
    const int j = i + static_cast<int>(rng.uniform(0.0, static_cast<double>(k - i)));
    std::swap(idx[i], idx[j]);
    w[idx[i]].lio = exp_se3({5.0 * random_unit(rng), 1.0 * random_unit(rng)}) * w[idx[i]].lio;
  }
  return {truth, w};
}

double trans_err(const Transform& a, const Transform& b) { return (a.translation() - b.translation()).norm(); }
double rot_err(const Transform& a, const Transform& b) { return rotation_angle(a.rotation().transpose() * b.rotation()); }

Outcome solver_recovery() {
  Outcome o;
  Rng rng(2024);
  double worst_t = 0.0, worst_r = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto [truth, w] = make_window(rng, 50, 0.0, 0.0, 0.0);
    const auto r = solve_alignment(w);
    worst_t = std::max(worst_t, trans_err(r.t_align, truth));
    worst_r = std::max(worst_r, rot_err(r.t_align, truth));
  }
  o.check(worst_t < 1e-6 && worst_r < 1e-6,
          fmt::format("noiseless worst {:.2e} m / {:.2e} rad over 100 offsets", worst_t, worst_r));

  std::vector<double> te, re;
  for (int trial = 0; trial < 100; ++trial) {
    const auto [truth, w] = make_window(rng, 50, 0.05, 0.5 * kDeg, 0.2);
    const auto r = solve_alignment(w);
    te.push_back(trans_err(r.t_align, truth));
    re.push_back(rot_err(r.t_align, truth));
  }
  o.check(median(te) < 0.05 && median(re) < 0.5 * kDeg,
          fmt::format("noisy + 20% outliers median {:.4f} m / {:.3f} deg", median(te), median(re) / kDeg));

  // Random-restart oracle on one noisy window.
  const auto [truth, w] = make_window(rng, 50, 0.05, 0.5 * kDeg, 0.2);
  const auto r = solve_alignment(w);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100000; ++i) {
    const PosePair& p = w[static_cast<std::size_t>(rng.uniform(0.0, 50.0))];
    const double scale = std::pow(10.0, rng.uniform(-3.0, 0.0));
    const Transform cand = exp_se3({rng.normal3(scale), rng.normal3(0.1 * scale)}) * (p.lio * p.vio.inverse());
    best = std::min(best, alignment_cost(cand, w, 1.0));
  }
  o.check(r.final_cost <= best + 1e-9, fmt::format("solver cost {:.6f} <= random-restart best {:.6f}", r.final_cost,
                                                   best));
  return o;
}

Outcome smoothing_exactness() {
  Outcome o;
  Rng rng(33);
  bool beta0 = true;
  double consistent = 0.0, endpoint = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Transform active = random_transform(rng);
    const Transform backup = random_transform(rng);
    const Transform align = random_transform(rng);
    const double beta = rng.uniform(0.0, 1.0);
    for (auto conv : {SmoothingConvention::kInterpolating, SmoothingConvention::kPaperLiteral}) {
      const Transform z = apply_smoothing(active, backup, align, 0.0, conv);
      beta0 = beta0 && z.rotation() == active.rotation() && z.translation() == active.translation();
      const Transform c = apply_smoothing(active, align.inverse() * active, align, beta, conv);
      consistent = std::max(consistent, transform_distance(c, active));
    }
    const Transform e = apply_smoothing(active, backup, align, 1.0, SmoothingConvention::kInterpolating);
    endpoint = std::max(endpoint, transform_distance(e, align * backup));
  }
  o.check(beta0, "beta=0 bit-exact");
  o.check(consistent < 1e-12, fmt::format("consistent streams {:.1e} < 1e-12", consistent));
  o.check(endpoint < 1e-9, fmt::format("beta=1 endpoint {:.1e} < 1e-9", endpoint));
  return o;
}

Outcome lie_suite() {
  Outcome o;
  Rng rng(55);
  double round_trip = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Twist xi{rng.uniform3(-5.0, 5.0), random_unit(rng) * rng.uniform(0.0, std::numbers::pi - 1e-3)};
    round_trip = std::max(round_trip, (log_se3(exp_se3(xi)).vector() - xi.vector()).norm());
  }
  o.check(round_trip < 1e-9, fmt::format("1e4 exp/log round trips {:.1e}", round_trip));

  double series = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 phi = random_unit(rng) * rng.uniform(0.0, std::numbers::pi);
    series = std::max(series, (exp_so3(phi) - rfusion::testing::series_exp(hat(phi), 30)).cwiseAbs().maxCoeff());
  }
  o.check(series < 1e-10, fmt::format("exp_so3 vs 30-term series {:.1e}", series));

  double jac = 0.0;
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const PosePair p{0.0, random_transform(rng), random_transform(rng), Covariance6::Identity()};
    const Transform t = random_transform(rng, 2.5);
    const Mat6 j = residual_jacobian(residual(t, p));
    Mat6 num;
    for (int d = 0; d < 6; ++d) {
      Vec6 e = Vec6::Zero();
      e[d] = h;
      num.col(d) = (residual(exp_se3(Twist::from_vector(e)) * t, p).twist.vector() -
                    residual(exp_se3(Twist::from_vector(-e)) * t, p).twist.vector()) /
                   (2 * h);
    }
    jac = std::max(jac, (num - j).norm() / j.norm());
  }
  o.check(jac < 1e-5, fmt::format("alignment Jacobian vs central differences {:.1e} relative", jac));
  return o;
}

Outcome icp_oracle() {
  Outcome o;
  Rng rng(66);
  std::size_t mismatches = 0, queries = 0;
  for (int inst = 0; inst < 100; ++inst) {
    std::vector<Vec3> pts;
    if (inst % 4 == 0) {
      // Integer lattice queried at cell centers: every query is an eight-way tie.
      for (int x = 0; x < 6; ++x)
        for (int y = 0; y < 6; ++y)
          for (int z = 0; z < 6; ++z) pts.emplace_back(x, y, z);
      std::shuffle(pts.begin(), pts.end(), std::mt19937_64(static_cast<std::uint64_t>(inst)));
    } else {
      const auto n = static_cast<std::size_t>(rng.uniform(10.0, 2000.0));
      for (std::size_t i = 0; i < n; ++i) pts.push_back(rng.uniform3(-5.0, 5.0));
    }
    const KdTree tree(pts);
    for (int q = 0; q < 100; ++q) {
      const Vec3 query = inst % 4 == 0 ? Vec3(std::floor(rng.uniform(0, 5)) + 0.5, std::floor(rng.uniform(0, 5)) + 0.5,
                                              std::floor(rng.uniform(0, 5)) + 0.5)
                                       : rng.uniform3(-6.0, 6.0);
      Neighbor best{pts.size(), std::numeric_limits<double>::infinity()};
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d = squared_distance(query, pts[i]);
        if (d < best.sq_dist) best = {i, d};
      }
      const Neighbor got = tree.nearest(query);
      mismatches += (got.index != best.index || got.sq_dist != best.sq_dist) ? 1 : 0;
      ++queries;
    }
  }
  o.check(mismatches == 0, fmt::format("{} / {} kd-tree queries differ from exhaustive search", mismatches, queries));

  double worst_t = 0.0, worst_r = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    ScanFrame source;
    for (int i = 0; i < 600; ++i) source.points.push_back(rng.uniform3(-6.0, 6.0));
    const Transform motion = exp_se3({rng.normal3(0.03), rng.normal3(0.01)});
    ScanFrame target;
    for (const auto& p : source.points) target.points.push_back(motion * p);
    const auto r = icp_align(source, target);
    worst_t = std::max(worst_t, trans_err(r.transform, motion));
    worst_r = std::max(worst_r, rot_err(r.transform, motion));
  }
  o.check(worst_t < 1e-6 && worst_r < 1e-6,
          fmt::format("noiseless ICP recovery {:.1e} m / {:.1e} rad", worst_t, worst_r));
  return o;
}

Trajectory random_path(Rng& rng, int n) {
  Trajectory out;
  Transform x = random_transform(rng);
  for (int i = 0; i < n; ++i) {
    out.push_back({0.1 * i, x, std::nullopt});
    x = x * exp_se3({Vec3(0.1, 0.0, 0.0) + rng.normal3(0.02), rng.normal3(0.05)});
  }
  return out;
}

Outcome metric_sanity() {
  Outcome o;
  Rng rng(77);
  const auto gt = random_path(rng, 200);
  o.check(ate_rmse(gt, gt, AlignmentMode::kRigid) == 0.0 && ate_rmse(gt, gt, AlignmentMode::kNone) == 0.0,
          "ate_rmse(gt, gt) = 0");

  auto shifted = gt;
  const Transform offset = random_transform(rng);
  for (auto& p : shifted) p.pose = offset * p.pose;
  const double off = ate_rmse(shifted, gt, AlignmentMode::kRigid);
  o.check(off < 1e-9, fmt::format("constant offset rigid ATE {:.1e}", off));

  Trajectory r3, e3;
  const Vec3 ref_pts[3] = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  const Vec3 est_pts[3] = {{0, 0, 0}, {1, 0, 0.3}, {2, 0, 0}};
  for (int i = 0; i < 3; ++i) {
    r3.push_back({1.0 * i, Transform(Mat3::Identity(), ref_pts[i]), std::nullopt});
    e3.push_back({1.0 * i, Transform(Mat3::Identity(), est_pts[i]), std::nullopt});
  }
  const double hand = ate_rmse(e3, r3, AlignmentMode::kNone);
  o.check(std::abs(hand - 0.1732) < 1e-4, fmt::format("3-pose case {:.6f}", hand));

  // 0.15 m/s along a fixed world axis for 19.9 s.
  auto drifted = gt;
  const Vec3 v(0.0, 0.15, 0.0);
  for (auto& p : drifted) p.pose = Transform(p.pose.rotation(), p.pose.translation() + v * p.t);
  const double expected = v.norm() * gt.back().t;
  const double got = drift_rate(associate(drifted, gt, 0.02));
  o.check(std::abs(got - expected) < 0.01 * expected, fmt::format("drift {:.4f} m vs {:.4f} m", got, expected));
  return o;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RFUSION_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = io::read_text(e.path());
  }
  return files;
}

Outcome determinism() {
  Outcome o;
  std::map<std::string, std::string> trees[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path dir = kRoot / ("determinism_" + std::to_string(k));
    fs::remove_all(dir);
    const std::string sim = (dir / "sim").string();
    const int a = run_cli("--seed 7 --out " + sim + " simulate --scenario corridor01-synth");
    const int b = run_cli("--out " + (dir / "fuse").string() + " fuse --scenario-dir " + sim + " --gt " + sim + "/gt.tum");
    const int c = run_cli("--out " + (dir / "eval").string() + " evaluate --est " + (dir / "fuse/fused.tum").string() +
                          " --gt " + sim + "/gt.tum");
    o.check(a == 0 && b == 0 && c == 0, fmt::format("run {} exit codes {} {} {}", k + 1, a, b, c));
    trees[k] = snapshot(dir);
  }
  o.check(trees[0] == trees[1] && !trees[0].empty(),
          fmt::format("{} files byte-identical across two runs", trees[0].size()));
  return o;
}

Outcome degeneracy_geometry() {
  Outcome o;
  const sim::Scenario clean = sim::named_scenario("corridor01-synth-clean");
  const sim::World world = sim::build_world(clean);
  std::vector<double> mid, rich, mid_eps, rich_eps;
  for (std::size_t i = 1; i < clean.scan_count(); i += 7) {
    const double t = static_cast<double>(i) / clean.scan_rate;
    const Vec3 p = sim::pose_at(clean, t).translation();
    const bool is_mid = sim::distance_to_corner(clean, p) > 5.0 && world.distance_to_features(p) > 5.0;
    const bool is_rich = world.distance_to_features(p) < 1.5;
    if (!is_mid && !is_rich) continue;
    const auto r = icp_align(sim::synth_scenario_scan(clean, world, i), sim::synth_scenario_scan(clean, world, i - 1));
    (is_mid ? mid : rich).push_back(r.report.hessian_min_eig);
    (is_mid ? mid_eps : rich_eps).push_back(r.report.eps_align);
  }
  o.check(!mid.empty() && !rich.empty() && median(mid) <= 0.01 * median(rich),
          fmt::format("median hessian_min_eig mid-corridor {:.3g} vs feature-rich {:.3g} (ratio {:.4f} <= 0.01)",
                      median(mid), median(rich), median(mid) / median(rich)));

  // Matching error: degraded sections of the corridor run vs its feature-rich
  // scans outside them.
  const auto& run = corridor();
  const auto& s = run.offline.data.scenario;
  const sim::World w = sim::build_world(s);
  const auto windows = lio_windows(s);
  std::vector<double> degraded, feature_rich;
  for (const auto& h : run.offline.health) {
    if (inside(windows, h.t)) {
      degraded.push_back(h.eps_align);
    } else if (w.distance_to_features(sim::pose_at(s, h.t).translation()) < 1.5) {
      feature_rich.push_back(h.eps_align);
    }
  }
  o.check(mean(degraded) > mean(feature_rich),
          fmt::format("mean eps_align degraded {:.4f} m^2 > feature-rich {:.4f} m^2", mean(degraded),
                      mean(feature_rich)));
  o.detail += fmt::format("; info: clean mid-corridor eps {:.4f} vs feature-rich {:.4f}", mean(mid_eps),
                          mean(rich_eps));
  return o;
}

}  // namespace

int main() {
  fs::create_directories(kRoot);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"switching beats LIO-only", switching_beats_lio},
      {"detector fidelity", detector_fidelity},
      {"alignment solver recovery", solver_recovery},
      {"smoothing exactness", smoothing_exactness},
      {"Lie-math property suite", lie_suite},
      {"ICP oracle equivalence", icp_oracle},
      {"metric sanity", metric_sanity},
      {"determinism", determinism},
      {"degeneracy geometry", degeneracy_geometry},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s criterion %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
