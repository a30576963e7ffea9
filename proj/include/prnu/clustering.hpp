#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "prnu/calibration.hpp"
#include "prnu/errors.hpp"
#include "prnu/filters.hpp"
#include "prnu/fingerprint.hpp"
#include "prnu/image_io.hpp"
#include "prnu/imaging.hpp"
#include "prnu/matrix.hpp"
#include "prnu/parallel.hpp"
#include "prnu/rng.hpp"

namespace prnu {

struct ClusterConfig {
  FilterConfig filter;
  int block_size = 50;
  std::uint64_t rng_seed = 0;
  double error_margin = 0.01;

  nlohmann::json to_json() const {
    return {{"filter", filter.to_json()},
            {"block_size", block_size},
            {"rng_seed", rng_seed},
            {"error_margin", error_margin}};
  }

  static ClusterConfig from_json(const nlohmann::json& j) {
    ClusterConfig c;
    c.filter = FilterConfig::from_json(j.at("filter"));
    c.block_size = j.at("block_size").get<int>();
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    c.error_margin = j.at("error_margin").get<double>();
    return c;
  }
};

/// A cluster under construction or in a result. `block` is the block the
/// group grew in; merged groups span blocks and carry no block (the
/// merged marker).
struct Group {
  int id = 0;
  Fingerprint fingerprint;
  std::optional<int> block;
  std::string fingerprint_file;  // set when the group fingerprint is saved
};

struct SkippedImage {
  std::string id;
  std::string error;
};

/// One membership decision. Seed picks carry pass 0, corr 1 and threshold
/// -1 (no threshold applies to a seed); grown members record the
/// correlation and threshold in force when they were admitted, with
/// `count` the fingerprint size at that moment. Entries always describe
/// the block stage; cross-block merges never alter them.
struct AuditEntry {
  std::string image;
  int group = 0;
  int pass = 0;
  double corr = 0.0;
  double threshold = 0.0;
  int count = 0;
};

struct PhaseTimings {
  double extract_ms = 0.0;
  double cluster_ms = 0.0;
  double merge_ms = 0.0;
};

struct ClusterResult {
  std::vector<Group> groups;
  ClusterConfig params;
  std::vector<int> block_sizes;
  std::vector<SkippedImage> skipped;
  std::vector<AuditEntry> audit;
  PhaseTimings timing;

  nlohmann::json to_json(bool include_timing = true) const {
    nlohmann::json group_list = nlohmann::json::array();
    for (const auto& g : groups) {
      nlohmann::json members = nlohmann::json::array();
      for (const auto& m : g.fingerprint.members) members.push_back(detail::member_line(m));
      nlohmann::json jg = {{"id", g.id},
                           {"size", g.fingerprint.count()},
                           {"block", g.block ? nlohmann::json(*g.block) : nlohmann::json()},
                           {"members", members}};
      if (!g.fingerprint_file.empty()) jg["fingerprint_file"] = g.fingerprint_file;
      group_list.push_back(std::move(jg));
    }
    nlohmann::json skipped_list = nlohmann::json::array();
    for (const auto& s : skipped) skipped_list.push_back({{"path", s.id}, {"error", s.error}});
    nlohmann::json audit_list = nlohmann::json::array();
    for (const auto& a : audit) {
      audit_list.push_back({{"image", a.image},
                            {"group", a.group},
                            {"pass", a.pass},
                            {"corr", a.corr},
                            {"threshold", a.threshold},
                            {"count", a.count}});
    }
    nlohmann::json j = {{"params", params.to_json()},
                        {"blocks", block_sizes},
                        {"groups", std::move(group_list)},
                        {"skipped", std::move(skipped_list)},
                        {"audit", std::move(audit_list)}};
    if (include_timing) {
      j["timing_ms"] = {{"extract", timing.extract_ms},
                        {"cluster", timing.cluster_ms},
                        {"merge", timing.merge_ms}};
    }
    return j;
  }
};

struct PatternEntry {
  std::string id;
  NoisePattern pattern;
};

/// Grow groups within one block: pick an unassigned image uniformly at
/// random as a seed, then repeatedly sweep all unassigned patterns and
/// admit every one whose correlation against the current fingerprint
/// exceeds lookup(count, 1), re-averaging once per sweep; when a sweep
/// admits nothing the group is final and the next seed is drawn. Members
/// are never removed.
inline std::vector<Group> cluster_block(const std::vector<PatternEntry>& patterns,
                                        const ThresholdTable& thresholds, rng::Stream& rng,
                                        int first_group_id = 0,
                                        std::optional<int> block_index = std::nullopt,
                                        std::vector<AuditEntry>* audit = nullptr) {
  if (patterns.empty()) return {};
  for (const auto& entry : patterns) {
    if (!entry.pattern.same_shape(patterns.front().pattern)) {
      throw DimensionError("patterns in a block must share dimensions");
    }
  }

  std::vector<Group> groups;
  std::vector<std::size_t> unassigned(patterns.size());
  for (std::size_t i = 0; i < patterns.size(); ++i) unassigned[i] = i;

  int group_id = first_group_id;
  while (!unassigned.empty()) {
    const std::size_t pick = rng.below(unassigned.size());
    const std::size_t seed = unassigned[pick];
    unassigned.erase(unassigned.begin() + pick);

    Group group;
    group.id = group_id++;
    group.block = block_index;
    group.fingerprint = Fingerprint::from_pattern(patterns[seed].pattern, patterns[seed].id);
    if (audit) audit->push_back({patterns[seed].id, group.id, 0, 1.0, -1.0, 0});

    NoisePattern sum = patterns[seed].pattern;
    for (int pass = 1; !unassigned.empty(); ++pass) {
      const int count = group.fingerprint.count();
      const double threshold = thresholds.lookup(count, 1);
      std::vector<std::pair<std::size_t, double>> admitted;
      for (const std::size_t idx : unassigned) {
        const double c = corr2(group.fingerprint.pattern, patterns[idx].pattern);
        if (c > threshold) admitted.emplace_back(idx, c);
      }
      if (admitted.empty()) break;
      for (const auto& [idx, c] : admitted) {
        group.fingerprint.members.push_back({patterns[idx].id, Rotation::R0});
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += patterns[idx].pattern[i];
        if (audit) audit->push_back({patterns[idx].id, group.id, pass, c, threshold, count});
      }
      std::erase_if(unassigned, [&](std::size_t idx) {
        return std::any_of(admitted.begin(), admitted.end(),
                           [idx](const auto& a) { return a.first == idx; });
      });
      const double inv = 1.0 / group.fingerprint.count();
      group.fingerprint.pattern = sum;
      for (double& v : group.fingerprint.pattern.data()) v *= inv;
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

/// Cross-block agglomeration: among pairs of groups not originating from
/// the same block, repeatedly merge the pair with the highest
/// best-rotation correlation exceeding lookup(count1, count2); ties break
/// toward the earliest pair in group order. The lower-id group's
/// orientation is canonical. Stops when no eligible pair clears its
/// threshold.
inline std::vector<Group> merge_blocks(std::vector<Group> groups,
                                       const ThresholdTable& thresholds) {
  if (groups.size() < 2) return groups;
  for (const auto& g : groups) {
    if (g.fingerprint.pattern.rows() != g.fingerprint.pattern.cols()) {
      throw DimensionError("rotation merging needs square fingerprints");
    }
    if (!g.fingerprint.pattern.same_shape(groups.front().fingerprint.pattern)) {
      throw DimensionError("group fingerprints must share dimensions");
    }
  }

  const std::size_t n = groups.size();
  std::vector<bool> alive(n, true);
  std::vector<std::vector<std::pair<Rotation, double>>> best(n);
  const auto eligible = [&](std::size_t i, std::size_t j) {
    return !(groups[i].block && groups[j].block && *groups[i].block == *groups[j].block);
  };
  for (std::size_t i = 0; i < n; ++i) {
    best[i].resize(n, {Rotation::R0, 0.0});
    for (std::size_t j = 0; j < i; ++j) {
      if (eligible(i, j)) {
        best[j][i] = best_rotation_corr(groups[j].fingerprint, groups[i].fingerprint);
      }
    }
  }

  while (true) {
    double top = 0.0;
    std::size_t top_i = n, top_j = n;
    bool found = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!alive[j] || !eligible(i, j)) continue;
        const double c = best[i][j].second;
        if (c <= thresholds.lookup(groups[i].fingerprint.count(),
                                   groups[j].fingerprint.count())) {
          continue;
        }
        if (!found || c > top) {
          found = true;
          top = c;
          top_i = i;
          top_j = j;
        }
      }
    }
    if (!found) break;

    groups[top_i].fingerprint = merge_fingerprints(groups[top_i].fingerprint,
                                                   groups[top_j].fingerprint,
                                                   best[top_i][top_j].first);
    groups[top_i].block.reset();
    alive[top_j] = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == top_i || !eligible(top_i, k)) continue;
      const auto [lo, hi] = std::minmax(top_i, k);
      best[lo][hi] = best_rotation_corr(groups[lo].fingerprint, groups[hi].fingerprint);
    }
  }

  std::vector<Group> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (alive[i]) out.push_back(std::move(groups[i]));
  }
  return out;
}

namespace detail {

inline void check_threshold_compat(const ClusterConfig& config, const ThresholdTable& thresholds) {
  if (thresholds.empty()) throw ConfigError("empty threshold table");
  if (!(thresholds.config == config.filter)) {
    throw ConfigError("threshold table was calibrated under a different filter configuration");
  }
  if (thresholds.error_margin != config.error_margin) {
    throw ConfigError("threshold table error margin does not match the requested one");
  }
}

inline void check_cluster_config(const ClusterConfig& config) {
  if (config.block_size < 1) throw ValueError("block size must be >= 1");
  if (config.filter.crop != 0 && config.filter.crop < 64) {
    throw ValueError("crop must be 0 (disabled) or >= 64");
  }
  if (!(config.error_margin > 0.0 && config.error_margin < 0.5)) {
    throw ValueError("error margin must be in (0, 0.5)");
  }
}

/// Shared pipeline: obtain each image's gray matrix via `load_gray(i)`,
/// extract patterns in parallel, cluster per block, then merge across
/// blocks. Per-image failures become skipped entries; nothing aborts the
/// run after validation.
template <typename LoadGray>
ClusterResult cluster_pipeline(const std::vector<std::string>& ids, LoadGray&& load_gray,
                               const ClusterConfig& config, const ThresholdTable& thresholds,
                               int threads) {
  if (ids.empty()) throw ValueError("no input images");
  check_cluster_config(config);
  check_threshold_compat(config, thresholds);

  using clock = std::chrono::steady_clock;
  const auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };

  ClusterResult result;
  result.params = config;
  const std::size_t n = ids.size();
  const std::size_t n_blocks = (n + config.block_size - 1) / config.block_size;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    result.block_sizes.push_back(static_cast<int>(
        std::min<std::size_t>(config.block_size, n - b * config.block_size)));
  }

  auto t0 = clock::now();
  std::vector<NoisePattern> patterns(n);
  std::vector<std::string> failures(n);
  parallel_for(n, threads, [&](std::size_t i) {
    try {
      patterns[i] = extract_pattern(load_gray(i), config.filter);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });
  result.timing.extract_ms = ms_since(t0);

  t0 = clock::now();
  std::vector<Group> groups;
  int next_id = 0;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    std::vector<PatternEntry> block;
    const std::size_t lo = b * config.block_size;
    const std::size_t hi = std::min(n, lo + config.block_size);
    for (std::size_t i = lo; i < hi; ++i) {
      if (failures[i].empty()) {
        block.push_back({ids[i], std::move(patterns[i])});
      } else {
        result.skipped.push_back({ids[i], failures[i]});
      }
    }
    rng::Stream stream(rng::derive_seed(config.rng_seed, 0xB10Cull, b));
    auto block_groups = cluster_block(block, thresholds, stream, next_id,
                                      static_cast<int>(b), &result.audit);
    next_id += static_cast<int>(block_groups.size());
    for (auto& g : block_groups) groups.push_back(std::move(g));
  }
  result.timing.cluster_ms = ms_since(t0);

  t0 = clock::now();
  result.groups = merge_blocks(std::move(groups), thresholds);
  result.timing.merge_ms = ms_since(t0);
  return result;
}

}  // namespace detail

/// Cluster a database of image files. Paths are split into consecutive
/// blocks of block_size; undecodable or degenerate images are reported in
/// `skipped` and never abort the run.
inline ClusterResult cluster_database(const std::vector<std::string>& image_paths,
                                      const ClusterConfig& config,
                                      const ThresholdTable& thresholds, int threads = 0) {
  return detail::cluster_pipeline(
      image_paths, [&](std::size_t i) { return to_gray_sum(load_image(image_paths[i])); },
      config, thresholds, threads);
}

/// Same pipeline over in-memory gray images.
inline ClusterResult cluster_images(const std::vector<std::pair<std::string, GrayImage>>& images,
                                    const ClusterConfig& config, const ThresholdTable& thresholds,
                                    int threads = 0) {
  std::vector<std::string> ids;
  ids.reserve(images.size());
  for (const auto& [id, gray] : images) ids.push_back(id);
  return detail::cluster_pipeline(
      ids, [&](std::size_t i) -> const GrayImage& { return images[i].second; }, config,
      thresholds, threads);
}

struct SuspectFingerprint {
  std::string id;
  Fingerprint fingerprint;
};

struct MatchRecord {
  std::string fingerprint_id;
  double corr = 0.0;
  bool matched = false;
  std::string error;  // nonempty when this fingerprint could not be compared
};

inline std::vector<MatchRecord> match_pattern(const std::vector<SuspectFingerprint>& suspects,
                                              const NoisePattern& pattern,
                                              const ThresholdTable& thresholds) {
  std::vector<MatchRecord> records;
  records.reserve(suspects.size());
  for (const auto& s : suspects) {
    MatchRecord rec;
    rec.fingerprint_id = s.id;
    if (!s.fingerprint.pattern.same_shape(pattern)) {
      rec.error = "fingerprint " + s.fingerprint.pattern.shape_str() +
                  " does not match extracted pattern " + pattern.shape_str();
    } else {
      rec.corr = corr2(s.fingerprint.pattern, pattern);
      rec.matched = rec.corr > thresholds.lookup(s.fingerprint.count(), 1);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

/// Extract the image's pattern and test it against every suspect
/// fingerprint at lookup(count, 1). Decode or degenerate failures
/// propagate; a per-fingerprint dimension mismatch only marks that
/// record.
inline std::vector<MatchRecord> match_against(const std::vector<SuspectFingerprint>& suspects,
                                              const std::string& image_path,
                                              const ClusterConfig& config,
                                              const ThresholdTable& thresholds) {
  detail::check_cluster_config(config);
  detail::check_threshold_compat(config, thresholds);
  const NoisePattern pattern =
      extract_pattern(to_gray_sum(load_image(image_path)), config.filter);
  return match_pattern(suspects, pattern, thresholds);
}

/// Re-check the audit trail against the source patterns: rebuild each
/// group's fingerprint state pass by pass and verify every recorded
/// correlation and threshold decision. Returns false on any discrepancy.
inline bool verify_audit(const std::vector<AuditEntry>& audit,
                         const std::map<std::string, NoisePattern>& patterns_by_id,
                         double tol = 1e-9) {
  std::map<int, std::vector<const AuditEntry*>> by_group;
  for (const auto& e : audit) by_group[e.group].push_back(&e);
  for (const auto& [gid, entries] : by_group) {
    if (entries.empty() || entries.front()->pass != 0) return false;
    NoisePattern sum = patterns_by_id.at(entries.front()->image);
    int count = 1;
    int done_pass = 0;   // passes fully folded into `sum`
    int pass_count = 1;  // fingerprint size when the current pass began
    NoisePattern mean = sum;
    for (std::size_t k = 1; k < entries.size(); ++k) {
      const AuditEntry& e = *entries[k];
      if (e.pass > done_pass) {
        mean = sum;
        const double inv = 1.0 / count;
        for (double& v : mean.data()) v *= inv;
        done_pass = e.pass;
        pass_count = count;
      }
      if (e.count != pass_count) return false;
      const double c = corr2(mean, patterns_by_id.at(e.image));
      if (std::abs(c - e.corr) > tol || !(e.corr > e.threshold)) return false;
      const NoisePattern& p = patterns_by_id.at(e.image);
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += p[i];
      ++count;
    }
  }
  return true;
}

}  // namespace prnu
