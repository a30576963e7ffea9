// End-to-end acceptance checks. Each test prints one [PASS]/[FAIL] line with
// the measured quantities so a log scan shows the whole story. Sizes are
// chosen to finish on a single core while leaving wide statistical margins;
// seeds are pinned, and everything downstream of them is bit-reproducible.
#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "prnu.hpp"

using prnu::FilterConfig;
using prnu::GrayImage;
using prnu::LabeledPattern;
using prnu::NoisePattern;
using prnu::Rotation;
using prnu::SyntheticDatabase;
using prnu::ThresholdTable;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

void report(bool pass, const std::string& text) {
  std::printf("[%s] %s\n", pass ? "PASS" : "FAIL", text.c_str());
  std::fflush(stdout);
  EXPECT_TRUE(pass) << text;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// Pattern extraction settings shared by the statistical criteria: the fast
// second-order filter with row/column suppression on full 128x128 frames.
FilterConfig stat_config() {
  FilterConfig cfg;
  cfg.filter = prnu::FilterKind::SecondOrder;
  cfg.suppress = prnu::SuppressStrategy::RowCol;
  cfg.crop = 0;
  return cfg;
}

std::vector<LabeledPattern> extract_corpus(SyntheticDatabase& db, const FilterConfig& cfg) {
  prnu::quantize_corpus(db);  // match what the file-based pipeline would see
  std::vector<LabeledPattern> samples(db.images.size());
  for (std::size_t i = 0; i < db.images.size(); ++i) {
    samples[i] = {db.images[i].id, db.images[i].camera,
                  prnu::extract_pattern(db.images[i].gray, cfg)};
    db.images[i].gray = GrayImage();  // release as we go
  }
  return samples;
}

// Calibration corpus and threshold table shared by several criteria.
struct CalibrationBundle {
  std::vector<LabeledPattern> samples;
  ThresholdTable table;
  double build_seconds = 0.0;
};

constexpr std::uint64_t kCalCorpusSeed = 20240817;
constexpr std::uint64_t kCalTrialSeed = 1234;
constexpr int kCalTrials = 6000;

const CalibrationBundle& calibration_bundle() {
  static const CalibrationBundle bundle = [] {
    const auto t0 = clock_type::now();
    CalibrationBundle b;
    SyntheticDatabase db = prnu::gen_database(12, 45, 128, 0.05, kCalCorpusSeed);
    b.samples = extract_corpus(db, stat_config());
    b.table = prnu::calibrate(b.samples, prnu::default_grid_counts(), 0.01, kCalTrials,
                              kCalTrialSeed, stat_config());
    b.build_seconds = seconds_since(t0);
    return b;
  }();
  return bundle;
}

double adjusted_rand_index(const std::vector<int>& truth, const std::vector<int>& pred) {
  std::map<std::pair<int, int>, long> cont;
  std::map<int, long> row, col;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++cont[{truth[i], pred[i]}];
    ++row[truth[i]];
    ++col[pred[i]];
  }
  const auto choose2 = [](long k) { return 0.5 * k * (k - 1); };
  double sum_ij = 0, sum_a = 0, sum_b = 0;
  for (const auto& [key, n] : cont) sum_ij += choose2(n);
  for (const auto& [key, n] : row) sum_a += choose2(n);
  for (const auto& [key, n] : col) sum_b += choose2(n);
  const double total = choose2(static_cast<long>(truth.size()));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  return (sum_ij - expected) / (max_index - expected);
}

class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("prnu_accept_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::filesystem::path path() const { return path_; }

private:
  std::filesystem::path path_;
};

}  // namespace

// 1. Filter cost ordering on full-size frames: the wavelet filter is the
//    slow, high-quality option; the differential filters are the fast ones.
TEST(Acceptance, FilterSpeedOrdering) {
  const auto t0 = clock_type::now();
  SyntheticDatabase db = prnu::gen_database(1, 50, 1024, 0.05, 1);
  prnu::quantize_corpus(db);

  const auto median_ms = [&](auto&& filter) {
    std::vector<double> times;
    for (const auto& img : db.images) {
      const auto s = clock_type::now();
      volatile double sink = filter(img.gray)(0, 0);
      (void)sink;
      times.push_back(1e3 * seconds_since(s));
    }
    std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
    return times[times.size() / 2];
  };
  const double sod = median_ms([](const GrayImage& g) { return prnu::extract_noise_second_order(g); });
  const double fod = median_ms([](const GrayImage& g) { return prnu::extract_noise_fourth_order(g); });
  const double wav = median_ms([](const GrayImage& g) { return prnu::extract_noise_wavelet(g, 3.0); });
  const double elapsed = seconds_since(t0);

  const bool pass = wav > fod && fod > sod && wav / sod >= 4.0 && elapsed < 120.0;
  report(pass, fmt("1 filter speed: median over 50 frames at 1024x1024: sod %.1f ms, "
                   "fod %.1f ms, wavelet %.1f ms; wavelet/sod %.1fx (>= 4x) [%.0f s]",
                   sod, fod, wav, wav / sod, elapsed));
}

// 2. Full separation of match and mismatch correlations at crop 1024 on a
//    10-camera corpus: the worst matching pair still beats the best
//    mismatching pair.
TEST(Acceptance, MatchMismatchSeparationAt1024) {
  const auto t0 = clock_type::now();
  FilterConfig cfg = stat_config();
  cfg.crop = 1024;

  SyntheticDatabase db = prnu::gen_database(10, 10, 1024, 0.05, 22);
  const auto samples = extract_corpus(db, cfg);

  double min_match = 2.0, max_mismatch = -2.0;
  long match_pairs = 0, mismatch_pairs = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      const double c = prnu::corr2(samples[i].pattern, samples[j].pattern);
      if (samples[i].camera == samples[j].camera) {
        min_match = std::min(min_match, c);
        ++match_pairs;
      } else {
        max_mismatch = std::max(max_mismatch, c);
        ++mismatch_pairs;
      }
    }
  }
  const double elapsed = seconds_since(t0);

  const bool pass = mismatch_pairs >= 400 && min_match > max_mismatch && elapsed < 300.0;
  report(pass, fmt("2 separation at 1024: min match %.4f > max mismatch %.4f over %ld/%ld "
                   "match/mismatch pairs [%.0f s]",
                   min_match, max_mismatch, match_pairs, mismatch_pairs, elapsed));
}

// 3. Thresholds calibrated at r = 1% generalize: on held-out mismatch
//    pairs (fresh sampling streams, disjoint from the calibration draws)
//    every cell's false-positive rate stays inside [0.5%, 1.5%].
TEST(Acceptance, CalibratedFprHoldsOnHoldout) {
  const auto t0 = clock_type::now();
  const CalibrationBundle& cal = calibration_bundle();

  const int holdout_trials = 8000;
  double worst_low = 1.0, worst_high = 0.0;
  int cells = 0;
  bool pass = true;
  const auto& grid = cal.table.grid_counts;
  for (std::size_t ia = 0; ia < grid.size(); ++ia) {
    for (std::size_t ib = ia; ib < grid.size(); ++ib, ++cells) {
      const int a = grid[ia], b = grid[ib];
      const auto corrs = prnu::sample_mismatch_corrs(cal.samples, a, b, holdout_trials, 5678,
                                                     1000 + static_cast<std::uint64_t>(cells));
      const double threshold = cal.table.cell(a, b);
      long above = 0;
      for (double c : corrs) above += c > threshold ? 1 : 0;
      const double fpr = static_cast<double>(above) / corrs.size();
      worst_low = std::min(worst_low, fpr);
      worst_high = std::max(worst_high, fpr);
      if (fpr < 0.005 || fpr > 0.015) pass = false;
    }
  }
  const double elapsed = seconds_since(t0) + cal.build_seconds;
  pass = pass && elapsed < 300.0;
  report(pass, fmt("3 holdout FPR at r=1%%: %d cells x %d pairs, range [%.3f%%, %.3f%%] "
                   "within [0.5%%, 1.5%%] [%.0f s incl. calibration]",
                   cells, holdout_trials, 100.0 * worst_low, 100.0 * worst_high, elapsed));
}

// 4. threshold(a,1) grows with the fingerprint size a: averaging suppresses
//    random noise but not corpus-wide structure, so the mismatch quantile
//    creeps up. One inversion up to 0.005 deep is tolerated.
TEST(Acceptance, ThresholdTrendWithFingerprintSize) {
  const ThresholdTable& table = calibration_bundle().table;
  const auto& grid = table.grid_counts;

  std::string values;
  int inversions = 0;
  double worst_drop = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = table.cell(grid[i], 1);
    values += fmt("%s%d:%.4f", i ? " " : "", grid[i], t);
    if (i > 0) {
      const double drop = table.cell(grid[i - 1], 1) - t;
      if (drop > 0) {
        ++inversions;
        worst_drop = std::max(worst_drop, drop);
      }
    }
  }
  const bool pass = inversions == 0 || (inversions == 1 && worst_drop <= 0.005);
  report(pass, fmt("4 threshold(a,1) trend: %s; inversions %d (worst drop %.4f, allowed one "
                   "up to 0.005)",
                   values.c_str(), inversions, worst_drop));
}

// 5. Database clustering recovers the cameras: 10 cameras x 20 images in
//    blocks of 50, scored against ground truth with the adjusted Rand index.
TEST(Acceptance, ClusteringRecoversCameras) {
  const auto t0 = clock_type::now();
  const CalibrationBundle& cal = calibration_bundle();

  SyntheticDatabase db = prnu::gen_database(10, 20, 128, 0.05, 1);
  prnu::quantize_corpus(db);
  std::vector<std::pair<std::string, GrayImage>> images;
  std::map<std::string, int> camera_index;
  for (const auto& img : db.images) {
    images.emplace_back(img.id, img.gray);
    camera_index.try_emplace(img.camera, static_cast<int>(camera_index.size()));
  }

  prnu::ClusterConfig cfg;
  cfg.filter = stat_config();
  cfg.block_size = 50;
  cfg.rng_seed = 7;
  cfg.error_margin = 0.01;
  const prnu::ClusterResult result = prnu::cluster_images(images, cfg, cal.table);

  std::vector<int> truth, pred;
  for (std::size_t g = 0; g < result.groups.size(); ++g) {
    for (const auto& m : result.groups[g].fingerprint.members) {
      const std::string camera = m.id.substr(0, m.id.find("_img"));
      truth.push_back(camera_index.at(camera));
      pred.push_back(static_cast<int>(g));
    }
  }
  const double ari = adjusted_rand_index(truth, pred);
  const double elapsed = seconds_since(t0);

  const bool pass = truth.size() == 200 && result.skipped.empty() && ari >= 0.95 &&
                    result.groups.size() <= 15 && elapsed < 600.0;
  report(pass, fmt("5 clustering: ARI %.4f (>= 0.95), %zu groups for 10 cameras (<= 15), "
                   "%zu skipped [%.0f s]",
                   ari, result.groups.size(), result.skipped.size(), elapsed));
}

// 6. A camera whose second half is stored rotated by 90 degrees, split
//    across two blocks, still collapses to one group with the rotation
//    recovered — for ten distinct corpus/run seed pairs.
TEST(Acceptance, RotatedSplitCameraMerges) {
  const CalibrationBundle& cal = calibration_bundle();
  int good = 0;
  std::string first_failure;
  for (int k = 0; k < 10; ++k) {
    SyntheticDatabase db = prnu::gen_database(1, 16, 128, 0.05, 3000 + k);
    prnu::quantize_corpus(db);
    std::vector<std::pair<std::string, GrayImage>> images;
    for (std::size_t i = 0; i < db.images.size(); ++i) {
      GrayImage gray = db.images[i].gray;
      if (i >= 8) gray = prnu::rotate(gray, Rotation::R90);
      images.emplace_back(db.images[i].id, std::move(gray));
    }

    prnu::ClusterConfig cfg;
    cfg.filter = stat_config();
    cfg.block_size = 8;  // upright images in block 0, rotated ones in block 1
    cfg.rng_seed = static_cast<std::uint64_t>(k);
    cfg.error_margin = 0.01;
    const prnu::ClusterResult result = prnu::cluster_images(images, cfg, cal.table);

    bool ok = result.groups.size() == 1 && result.groups[0].fingerprint.count() == 16 &&
              !result.groups[0].block.has_value();
    if (ok) {
      for (const auto& m : result.groups[0].fingerprint.members) {
        const bool was_rotated = m.id.substr(m.id.find("_img") + 4) >= "008";
        // Undoing the stored quarter turn takes three more quarter turns.
        const Rotation expected = was_rotated ? Rotation::R270 : Rotation::R0;
        if (m.rotation != expected) ok = false;
      }
    }
    if (ok) {
      ++good;
    } else if (first_failure.empty()) {
      first_failure = fmt(" (first failure: seed %d, %zu groups)", k, result.groups.size());
    }
  }
  report(good == 10, fmt("6 rotated split camera: merged with recovered rotation in %d/10 "
                         "seeds%s",
                         good, first_failure.c_str()));
}

// 7. Property bundle: correlation oracle agreement, invariances, rotation
//    group laws, and clustering determinism across thread counts on a real
//    file corpus.
TEST(Acceptance, PropertySuites) {
  bool pass = true;
  std::string detail;

  // corr2 against an independent long-double evaluation on random 16x16.
  {
    prnu::rng::Stream stream(70001);
    NoisePattern a(16, 16), b(16, 16);
    stream.fill_normal(a.data());
    stream.fill_normal(b.data());
    long double sa = 0, sb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      sa += a[i];
      sb += b[i];
    }
    const long double ma = sa / a.size(), mb = sb / b.size();
    long double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += (a[i] - ma) * (b[i] - mb);
      na += (a[i] - ma) * (a[i] - ma);
      nb += (b[i] - mb) * (b[i] - mb);
    }
    const double reference = static_cast<double>(dot / sqrtl(na * nb));
    const double delta = std::abs(prnu::corr2(a, b) - reference);
    if (delta > 1e-12) {
      pass = false;
      detail += fmt(" corr2 oracle delta %.2e;", delta);
    }

    // Affine invariance at 1e-9.
    NoisePattern mapped = b;
    for (double& v : mapped.data()) v = 2.5 * v - 4.0;
    if (std::abs(prnu::corr2(a, mapped) - prnu::corr2(a, b)) > 1e-9) {
      pass = false;
      detail += " corr2 affine invariance;";
    }
  }

  // average_into is order-invariant at 1e-9.
  {
    prnu::rng::Stream stream(70002);
    std::vector<NoisePattern> patterns(4, NoisePattern(12, 12));
    for (auto& p : patterns) stream.fill_normal(p.data());
    prnu::Fingerprint fwd = prnu::Fingerprint::from_pattern(patterns[0], "p0");
    for (int i = 1; i < 4; ++i) prnu::average_into(fwd, patterns[i], fmt("p%d", i));
    prnu::Fingerprint rev = prnu::Fingerprint::from_pattern(patterns[3], "p3");
    for (int i = 2; i >= 0; --i) prnu::average_into(rev, patterns[i], fmt("p%d", i));
    for (std::size_t i = 0; i < fwd.pattern.size(); ++i) {
      if (std::abs(fwd.pattern[i] - rev.pattern[i]) > 1e-9) {
        pass = false;
        detail += " average_into order invariance;";
        break;
      }
    }
  }

  // Rotation group laws on a random non-symmetric matrix.
  {
    prnu::rng::Stream stream(70003);
    NoisePattern p(9, 9);
    stream.fill_normal(p.data());
    const auto same = [](const NoisePattern& x, const NoisePattern& y) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] != y[i]) return false;
      }
      return true;
    };
    using prnu::rotate;
    if (!same(rotate(rotate(p, Rotation::R90), Rotation::R90), rotate(p, Rotation::R180)) ||
        !same(rotate(rotate(p, Rotation::R180), Rotation::R180), p) ||
        !same(rotate(rotate(p, Rotation::R90), Rotation::R270), p)) {
      pass = false;
      detail += " rotation group laws;";
    }
  }

  // Partition property and thread-count determinism of cluster_database.
  {
    TempDir dir("props");
    const CalibrationBundle& cal = calibration_bundle();
    SyntheticDatabase db = prnu::gen_database(2, 5, 128, 0.05, 70004);
    prnu::write_corpus(db, dir.path().string());
    std::vector<std::string> paths;
    for (const auto& img : db.images) {
      paths.push_back((dir.path() / (img.id + ".png")).string());
    }

    prnu::ClusterConfig cfg;
    cfg.filter = stat_config();
    cfg.rng_seed = 9;
    cfg.error_margin = 0.01;
    const auto r1 = prnu::cluster_database(paths, cfg, cal.table, 1);
    const auto r2 = prnu::cluster_database(paths, cfg, cal.table, 2);
    const auto rmax = prnu::cluster_database(paths, cfg, cal.table, 0);
    if (r1.to_json(false).dump() != r2.to_json(false).dump() ||
        r1.to_json(false).dump() != rmax.to_json(false).dump()) {
      pass = false;
      detail += " thread determinism;";
    }

    std::multiset<std::string> seen;
    for (const auto& g : r1.groups) {
      for (const auto& m : g.fingerprint.members) seen.insert(m.id);
    }
    for (const auto& s : r1.skipped) seen.insert(s.id);
    if (seen != std::multiset<std::string>(paths.begin(), paths.end())) {
      pass = false;
      detail += " partition property;";
    }
  }

  report(pass, "7 property suites: corr2 oracle + invariances, rotation laws, partition and "
               "thread determinism" +
                   (detail.empty() ? std::string(" all hold") : detail));
}

// 8. Suppression efficacy: with a periodic tone (8-pixel period) injected at
//    the same RMS as the PRNU signal itself, suppress=both recovers a
//    cleanly better estimate than suppress=none.
TEST(Acceptance, PeriodicNoiseSuppression) {
  const int n = 256;
  const prnu::SyntheticCamera cam = prnu::gen_camera(88, n, 0.05);
  prnu::rng::Stream stream(89);

  // Flat mid-gray scene, PRNU signal RMS 400*0.05 = 20, tone RMS 20.
  GrayImage img(n, n);
  const double amplitude = 20.0 * std::sqrt(2.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double tone = amplitude * std::sin(2.0 * M_PI * j / 8.0);
      const double v = 400.0 * (1.0 + cam.strength * cam.prnu(i, j)) + tone + 5.0 * stream.normal();
      img(i, j) = std::max(0.0, v);
    }
  }

  FilterConfig cfg;
  cfg.filter = prnu::FilterKind::Wavelet;
  cfg.sigma0 = 80.0;  // well above local variation: the filter passes all detail
  cfg.crop = 0;
  cfg.suppress = prnu::SuppressStrategy::None;
  const double corr_none = prnu::corr2(prnu::extract_pattern(img, cfg), cam.prnu);
  cfg.suppress = prnu::SuppressStrategy::Both;
  const double corr_both = prnu::corr2(prnu::extract_pattern(img, cfg), cam.prnu);

  const double gain = corr_both - corr_none;
  report(gain >= 0.1, fmt("8 suppression: corr none %.3f -> both %.3f, gain %.3f (>= 0.1)",
                          corr_none, corr_both, gain));
}
