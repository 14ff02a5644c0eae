#include "rfusion/associate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace rfusion {

std::vector<std::pair<std::size_t, std::size_t>> associate_stamps(const std::vector<double>& a,
                                                                  const std::vector<double>& b, double tolerance) {
  if (!(tolerance >= 0.0)) throw std::invalid_argument("association tolerance must be >= 0");
  struct Candidate {
    double gap;
    std::size_t i;
    std::size_t j;
  };
  std::vector<Candidate> cand;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    while (lo < b.size() && b[lo] < a[i] - tolerance) ++lo;
    for (std::size_t j = lo; j < b.size() && b[j] <= a[i] + tolerance; ++j) cand.push_back({std::abs(a[i] - b[j]), i, j});
  }
  std::sort(cand.begin(), cand.end(),
            [](const Candidate& x, const Candidate& y) { return std::tie(x.gap, x.i, x.j) < std::tie(y.gap, y.i, y.j); });
  std::vector<char> used_a(a.size(), 0), used_b(b.size(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& c : cand) {
    if (used_a[c.i] || used_b[c.j]) continue;
    used_a[c.i] = used_b[c.j] = 1;
    out.emplace_back(c.i, c.j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace rfusion
