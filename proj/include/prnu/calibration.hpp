#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "prnu/errors.hpp"
#include "prnu/filters.hpp"
#include "prnu/fingerprint.hpp"
#include "prnu/matrix.hpp"
#include "prnu/parallel.hpp"
#include "prnu/rng.hpp"

namespace prnu {

/// One extracted pattern with ground-truth camera label, the unit of the
/// calibration sample database.
struct LabeledPattern {
  std::string id;
  std::string camera;
  NoisePattern pattern;
};

/// Empirical quantile with linear interpolation between order statistics
/// (position h = (n-1)p, interpolate between floor and ceil).
inline double quantile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw DimensionError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const double lo = std::floor(h);
  const std::size_t i = static_cast<std::size_t>(lo);
  if (i + 1 >= values.size()) return values.back();
  return values[i] + (h - lo) * (values[i + 1] - values[i]);
}

/// Decision thresholds threshold(a,b) at a fixed false-positive rate.
/// Thresholds are only valid for patterns produced under the same filter
/// configuration; the config is stored and enforced by consumers.
struct ThresholdTable {
  double error_margin = 0.0;
  std::vector<int> grid_counts;
  std::map<std::pair<int, int>, double> cells;
  int trials_per_cell = 0;
  FilterConfig config;

  bool empty() const { return cells.empty(); }

  double cell(int a, int b) const {
    const auto it = cells.find({a, b});
    if (it == cells.end()) {
      throw ConfigError("threshold table has no cell (" + std::to_string(a) + "," +
                        std::to_string(b) + ")");
    }
    return it->second;
  }

  /// Exact grid value when (a,b) is calibrated; otherwise bilinear
  /// interpolation in (log2 a, log2 b) between the surrounding grid counts.
  /// Counts beyond the grid clamp to the nearest edge.
  double lookup(int a, int b) const {
    if (empty()) throw ConfigError("empty threshold table");
    if (a < 1 || b < 1) throw ValueError("fingerprint counts must be >= 1");
    const auto bracket = [&](int v) -> std::pair<std::pair<int, int>, double> {
      const int lo_count = grid_counts.front(), hi_count = grid_counts.back();
      const int c = std::clamp(v, lo_count, hi_count);
      auto it = std::lower_bound(grid_counts.begin(), grid_counts.end(), c);
      if (*it == c) return {{c, c}, 0.0};
      const int c1 = *it, c0 = *std::prev(it);
      const double u = (std::log2(static_cast<double>(c)) - std::log2(static_cast<double>(c0))) /
                       (std::log2(static_cast<double>(c1)) - std::log2(static_cast<double>(c0)));
      return {{c0, c1}, u};
    };
    const auto [abr, u] = bracket(a);
    const auto [bbr, v] = bracket(b);
    const double t00 = cell(abr.first, bbr.first);
    const double t10 = cell(abr.second, bbr.first);
    const double t01 = cell(abr.first, bbr.second);
    const double t11 = cell(abr.second, bbr.second);
    return (1 - u) * (1 - v) * t00 + u * (1 - v) * t10 + (1 - u) * v * t01 + u * v * t11;
  }

  nlohmann::json to_json() const {
    nlohmann::json cell_list = nlohmann::json::array();
    for (const auto& [key, threshold] : cells) {
      cell_list.push_back({{"a", key.first},
                           {"b", key.second},
                           {"threshold", threshold},
                           {"trials", trials_per_cell}});
    }
    return {{"version", 1},
            {"error_margin", error_margin},
            {"grid_counts", grid_counts},
            {"cells", cell_list},
            {"filter_config", config.to_json()}};
  }

  static ThresholdTable from_json(const nlohmann::json& j) {
    ThresholdTable t;
    if (j.at("version").get<int>() != 1) {
      throw ConfigError("unsupported threshold table version");
    }
    t.error_margin = j.at("error_margin").get<double>();
    t.grid_counts = j.at("grid_counts").get<std::vector<int>>();
    t.config = FilterConfig::from_json(j.at("filter_config"));
    for (const auto& cell : j.at("cells")) {
      t.cells[{cell.at("a").get<int>(), cell.at("b").get<int>()}] =
          cell.at("threshold").get<double>();
      t.trials_per_cell = cell.at("trials").get<int>();
    }
    for (int a : t.grid_counts)
      for (int b : t.grid_counts) t.cell(a, b);  // completeness check
    return t;
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw FileError(path, "cannot open file for writing");
    os << to_json().dump(2) << "\n";
  }

  static ThresholdTable load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FileError(path, "cannot open file");
    try {
      return from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad threshold table in " + path + ": " + e.what());
    }
  }
};

inline const std::vector<int>& default_grid_counts() {
  static const std::vector<int> counts = {1, 2, 5, 10, 20, 40};
  return counts;
}

namespace detail {

struct CameraIndex {
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> patterns;  // sample indices per camera
};

inline CameraIndex index_cameras(const std::vector<LabeledPattern>& samples) {
  CameraIndex idx;
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].camera.empty()) throw ValueError("empty camera identifier");
    auto [it, inserted] = pos.try_emplace(samples[i].camera, idx.names.size());
    if (inserted) {
      idx.names.push_back(samples[i].camera);
      idx.patterns.emplace_back();
    }
    idx.patterns[it->second].push_back(i);
  }
  return idx;
}

}  // namespace detail

/// Correlations of `trials` randomly assembled mismatching fingerprint
/// pairs: a patterns from one camera vs b from another, cameras distinct,
/// patterns drawn without replacement. Each trial runs on its own stream
/// derived from (seed, stream_tag, trial), so thread count cannot change
/// the result. Shared by calibration and by held-out FPR evaluation.
inline std::vector<double> sample_mismatch_corrs(const std::vector<LabeledPattern>& samples,
                                                 const detail::CameraIndex& cameras, int a, int b,
                                                 int trials, std::uint64_t seed,
                                                 std::uint64_t stream_tag, int threads = 1) {
  std::vector<std::size_t> eligible_a, eligible_b;
  for (std::size_t c = 0; c < cameras.names.size(); ++c) {
    if (cameras.patterns[c].size() >= static_cast<std::size_t>(a)) eligible_a.push_back(c);
    if (cameras.patterns[c].size() >= static_cast<std::size_t>(b)) eligible_b.push_back(c);
  }
  const bool pair_exists =
      !eligible_a.empty() && !eligible_b.empty() &&
      !(eligible_a.size() == 1 && eligible_b.size() == 1 && eligible_a[0] == eligible_b[0]);
  if (!pair_exists) return {};

  std::vector<double> corrs(trials);
  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    rng::Stream stream(rng::derive_seed(seed, stream_tag, t));
    std::size_t cam_a, cam_b;
    do {
      cam_a = eligible_a[stream.below(eligible_a.size())];
      cam_b = eligible_b[stream.below(eligible_b.size())];
    } while (cam_a == cam_b);

    const auto build_mean = [&](std::size_t cam, int count) {
      const auto& pool = cameras.patterns[cam];
      const auto picks = stream.sample_indices(pool.size(), count);
      NoisePattern sum = samples[pool[picks[0]]].pattern;
      for (std::size_t k = 1; k < picks.size(); ++k) {
        const NoisePattern& p = samples[pool[picks[k]]].pattern;
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += p[i];
      }
      const double inv = 1.0 / count;
      for (double& v : sum.data()) v *= inv;
      return sum;
    };
    const NoisePattern fp_a = build_mean(cam_a, a);
    const NoisePattern fp_b = build_mean(cam_b, b);
    corrs[t] = corr2(fp_a, fp_b);
  });
  return corrs;
}

inline std::vector<double> sample_mismatch_corrs(const std::vector<LabeledPattern>& samples,
                                                 int a, int b, int trials, std::uint64_t seed,
                                                 std::uint64_t stream_tag = 0, int threads = 1) {
  return sample_mismatch_corrs(samples, detail::index_cameras(samples), a, b, trials, seed,
                               stream_tag, threads);
}

/// Build the threshold(a,b) table: for every pair of grid counts, sample
/// mismatching fingerprint correlations and take the empirical (1-r)
/// quantile. Deterministic in (samples, parameters, seed) at any thread
/// count.
inline ThresholdTable calibrate(const std::vector<LabeledPattern>& samples,
                                const std::vector<int>& grid_counts, double r, int trials,
                                std::uint64_t rng_seed, const FilterConfig& config,
                                int threads = 1) {
  if (!(r > 0.0 && r < 0.5)) {
    throw ValueError("error margin must be in (0, 0.5)");
  }
  if (trials < 100) {
    throw ValueError("calibration needs at least 100 trials per cell");
  }
  if (grid_counts.empty()) throw ValueError("empty grid");
  std::vector<int> grid = grid_counts;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() < 1) throw ValueError("grid counts must be >= 1");

  for (const auto& s : samples) {
    if (!s.pattern.same_shape(samples.front().pattern)) {
      throw DimensionError("calibration patterns must share dimensions");
    }
  }
  const detail::CameraIndex cameras = detail::index_cameras(samples);
  if (cameras.names.size() < 2) {
    throw CalibrationError("calibration needs at least 2 distinct cameras");
  }

  ThresholdTable table;
  table.error_margin = r;
  table.grid_counts = grid;
  table.trials_per_cell = trials;
  table.config = config;

  std::vector<std::pair<int, int>> skipped;
  std::uint64_t cell_tag = 0;
  for (std::size_t ia = 0; ia < grid.size(); ++ia) {
    for (std::size_t ib = ia; ib < grid.size(); ++ib, ++cell_tag) {
      const int a = grid[ia], b = grid[ib];
      const std::vector<double> corrs =
          sample_mismatch_corrs(samples, cameras, a, b, trials, rng_seed, cell_tag, threads);
      if (corrs.empty()) {
        skipped.emplace_back(a, b);
        continue;
      }
      const double threshold = quantile_linear(corrs, 1.0 - r);
      table.cells[{a, b}] = threshold;
      table.cells[{b, a}] = threshold;
    }
  }
  if (!skipped.empty()) {
    std::string msg = "insufficient samples for cells:";
    for (const auto& [a, b] : skipped) {
      msg += " (" + std::to_string(a) + "," + std::to_string(b) + ")";
    }
    throw CalibrationError(msg, skipped);
  }
  return table;
}

struct RocStats {
  double tpr = 0.0;
  double fpr = 0.0;
};

/// Fractions strictly above the threshold, matching the decision rule
/// corr2 > threshold.
inline RocStats roc_stats(const std::vector<double>& match_corrs,
                          const std::vector<double>& mismatch_corrs, double threshold) {
  if (match_corrs.empty() || mismatch_corrs.empty()) {
    throw DimensionError("roc_stats requires nonempty correlation lists");
  }
  const auto above = [threshold](const std::vector<double>& v) {
    std::size_t n = 0;
    for (double c : v) n += c > threshold ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(v.size());
  };
  return {above(match_corrs), above(mismatch_corrs)};
}

}  // namespace prnu
