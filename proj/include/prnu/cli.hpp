#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "prnu/calibration.hpp"
#include "prnu/clustering.hpp"
#include "prnu/errors.hpp"
#include "prnu/filters.hpp"
#include "prnu/fingerprint.hpp"
#include "prnu/image_io.hpp"
#include "prnu/imaging.hpp"
#include "prnu/parallel.hpp"
#include "prnu/simkit.hpp"

namespace prnu::cli {

namespace detail {

struct CommonOpts {
  std::string filter = "sod";
  double sigma0 = 3.0;
  std::string suppress = "rowcol";
  int crop = 1024;
  double error_margin = 0.01;
  int block_size = 50;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string output;
  std::string format = "json";

  FilterConfig filter_config() const {
    return {filter_from_name(filter), sigma0, suppress_from_name(suppress), crop};
  }

  ClusterConfig cluster_config() const {
    return {filter_config(), block_size, seed, error_margin};
  }
};

inline void add_common_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--filter", o.filter, "Extraction filter")
      ->check(CLI::IsMember({"wavelet", "sod", "fod"}))
      ->capture_default_str();
  cmd->add_option("--sigma0", o.sigma0, "Wavelet noise std")->capture_default_str();
  cmd->add_option("--suppress", o.suppress, "Periodic-noise suppression")
      ->check(CLI::IsMember({"none", "rowcol", "fftwiener", "both"}))
      ->capture_default_str();
  cmd->add_option("--crop", o.crop, "Center-crop size, 0 disables")->capture_default_str();
  cmd->add_option("--error-margin", o.error_margin, "Target false-positive rate r")
      ->capture_default_str();
  cmd->add_option("--block-size", o.block_size, "Images per clustering block")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "RNG seed")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads, 0 = all")->capture_default_str();
  cmd->add_option("--output,-o", o.output, "Output file or directory");
  cmd->add_option("--format", o.format, "Report format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
}

inline void validate_common(const CommonOpts& o) {
  if (o.sigma0 <= 0.0) throw ValueError("--sigma0 must be > 0");
  if (o.crop != 0 && o.crop < 64) throw ValueError("--crop must be 0 or >= 64");
  if (!(o.error_margin > 0.0 && o.error_margin < 0.5)) {
    throw ValueError("--error-margin must be in (0, 0.5)");
  }
  if (o.block_size < 1) throw ValueError("--block-size must be >= 1");
}

inline void emit(const std::string& text, const std::string& output) {
  if (output.empty()) {
    std::cout << text;
    if (text.empty() || text.back() != '\n') std::cout << "\n";
    return;
  }
  std::ofstream os(output);
  if (!os) throw FileError(output, "cannot open file for writing");
  os << text;
  if (text.empty() || text.back() != '\n') os << "\n";
}

inline std::vector<std::string> list_images(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw FileError(dir, "not a directory");
  std::vector<std::string> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") {
      paths.push_back(entry.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  return paths;
}

inline std::vector<std::pair<std::string, std::string>> read_labels_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FileError(path, "cannot open file");
  std::string line;
  if (!std::getline(is, line) || line != "path,camera_id") {
    throw ConfigError("labels file " + path + " must start with header 'path,camera_id'");
  }
  const auto base = std::filesystem::path(path).parent_path();
  std::vector<std::pair<std::string, std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::size_t comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 == line.size()) {
      throw ConfigError("bad labels row: " + line);
    }
    std::filesystem::path img(line.substr(0, comma));
    if (img.is_relative()) img = base / img;
    rows.emplace_back(img.string(), line.substr(comma + 1));
  }
  if (rows.empty()) throw ConfigError("labels file " + path + " lists no images");
  return rows;
}

inline std::string fingerprint_filename(const std::string& image_path,
                                        std::vector<std::string>& taken) {
  std::string stem = std::filesystem::path(image_path).stem().string();
  if (stem.empty()) stem = "pattern";
  std::string name = stem + ".prnu";
  for (int k = 2; std::find(taken.begin(), taken.end(), name) != taken.end(); ++k) {
    name = stem + "_" + std::to_string(k) + ".prnu";
  }
  taken.push_back(name);
  return name;
}

struct ItemError {
  std::string item;
  std::string error;
};

inline nlohmann::json errors_json(const std::vector<ItemError>& errors) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : errors) list.push_back({{"item", e.item}, {"error", e.error}});
  return list;
}

// ---- extract ----------------------------------------------------------

inline int cmd_extract(const std::vector<std::string>& images, const CommonOpts& opts) {
  validate_common(opts);
  if (opts.output.empty()) throw ValueError("extract needs --output DIR for fingerprint files");
  if (images.empty()) throw ValueError("no input images");
  std::filesystem::create_directories(opts.output);
  const FilterConfig config = opts.filter_config();

  std::vector<NoisePattern> patterns(images.size());
  std::vector<std::string> failures(images.size());
  parallel_for(images.size(), opts.threads, [&](std::size_t i) {
    try {
      patterns[i] = extract_pattern(to_gray_sum(load_image(images[i])), config);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });

  std::vector<ItemError> errors;
  nlohmann::json outputs = nlohmann::json::array();
  std::vector<std::string> taken;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!failures[i].empty()) {
      errors.push_back({images[i], failures[i]});
      continue;
    }
    const std::string file =
        (std::filesystem::path(opts.output) / fingerprint_filename(images[i], taken)).string();
    write_fingerprint({Fingerprint::from_pattern(std::move(patterns[i]), images[i]), config},
                      file);
    outputs.push_back({{"image", images[i]}, {"fingerprint", file}});
  }

  const nlohmann::json report = {{"config", config.to_json()},
                                 {"outputs", std::move(outputs)},
                                 {"errors", errors_json(errors)}};
  std::cout << report.dump(2) << "\n";
  return errors.empty() ? 0 : 1;
}

// ---- calibrate --------------------------------------------------------

inline int cmd_calibrate(const std::string& labels_path, const std::string& grid_spec,
                         int trials, const CommonOpts& opts) {
  validate_common(opts);
  if (opts.output.empty()) throw ValueError("calibrate needs --output FILE for the table");

  std::vector<int> grid;
  std::stringstream ss(grid_spec);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      grid.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ValueError("bad --grid entry: " + tok);
    }
  }

  const auto rows = read_labels_csv(labels_path);
  const FilterConfig config = opts.filter_config();
  std::vector<NoisePattern> patterns(rows.size());
  std::vector<std::string> failures(rows.size());
  parallel_for(rows.size(), opts.threads, [&](std::size_t i) {
    try {
      patterns[i] = extract_pattern(to_gray_sum(load_image(rows[i].first)), config);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });

  std::vector<LabeledPattern> samples;
  std::vector<ItemError> errors;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (failures[i].empty()) {
      samples.push_back({rows[i].first, rows[i].second, std::move(patterns[i])});
    } else {
      errors.push_back({rows[i].first, failures[i]});
    }
  }
  if (samples.empty()) throw CalibrationError("no usable calibration images");

  const ThresholdTable table =
      calibrate(samples, grid, opts.error_margin, trials, opts.seed, config, opts.threads);
  table.save(opts.output);

  if (opts.format == "csv") {
    std::ostringstream csv;
    csv << "a,b,threshold,trials\n";
    for (const auto& [key, threshold] : table.cells) {
      csv << key.first << "," << key.second << "," << threshold << "," << table.trials_per_cell
          << "\n";
    }
    std::cout << csv.str();
  } else {
    nlohmann::json report = table.to_json();
    report["samples"] = samples.size();
    report["table_file"] = opts.output;
    report["errors"] = errors_json(errors);
    std::cout << report.dump(2) << "\n";
  }
  return errors.empty() ? 0 : 1;
}

// ---- cluster ----------------------------------------------------------

inline std::string cluster_csv(const ClusterResult& result) {
  std::ostringstream csv;
  csv << "group,member,rotation\n";
  for (const auto& g : result.groups) {
    for (const auto& m : g.fingerprint.members) {
      csv << g.id << "," << m.id << "," << rotation_name(m.rotation) << "\n";
    }
  }
  return csv.str();
}

inline int cmd_cluster(std::vector<std::string> images, const std::string& images_dir,
                       const std::string& thresholds_path, const std::string& fingerprint_dir,
                       const CommonOpts& opts) {
  validate_common(opts);
  if (!images_dir.empty()) {
    for (auto& p : list_images(images_dir)) images.push_back(std::move(p));
  }
  if (images.empty()) throw ValueError("no input images");

  const ThresholdTable thresholds = ThresholdTable::load(thresholds_path);
  ClusterResult result =
      cluster_database(images, opts.cluster_config(), thresholds, opts.threads);

  if (!fingerprint_dir.empty()) {
    std::filesystem::create_directories(fingerprint_dir);
    for (auto& g : result.groups) {
      const std::string file =
          (std::filesystem::path(fingerprint_dir) / ("group_" + std::to_string(g.id) + ".prnu"))
              .string();
      write_fingerprint({g.fingerprint, opts.filter_config()}, file);
      g.fingerprint_file = file;
    }
  }

  if (opts.format == "csv") {
    emit(cluster_csv(result), opts.output);
  } else {
    nlohmann::json report = result.to_json();
    report["thresholds"] = thresholds_path;
    emit(report.dump(2), opts.output);
  }
  return result.skipped.empty() ? 0 : 1;
}

// ---- match ------------------------------------------------------------

inline int cmd_match(const std::vector<std::string>& images,
                     const std::vector<std::string>& fingerprint_paths,
                     const std::string& thresholds_path, const CommonOpts& opts) {
  validate_common(opts);
  if (images.empty()) throw ValueError("no input images");
  if (fingerprint_paths.empty()) throw ValueError("match needs --fingerprints");

  const FilterConfig config = opts.filter_config();
  const ThresholdTable thresholds = ThresholdTable::load(thresholds_path);
  std::vector<SuspectFingerprint> suspects;
  for (const auto& path : fingerprint_paths) {
    StoredFingerprint sf = read_fingerprint(path);
    if (!(sf.config == config)) {
      throw ConfigError("fingerprint " + path +
                        " was extracted under a different filter configuration");
    }
    suspects.push_back({path, std::move(sf.fingerprint)});
  }

  std::vector<ItemError> errors;
  nlohmann::json results = nlohmann::json::array();
  std::ostringstream csv;
  csv << "image,fingerprint,corr,matched\n";
  for (const auto& image : images) {
    try {
      const auto records =
          match_against(suspects, image, opts.cluster_config(), thresholds);
      nlohmann::json matches = nlohmann::json::array();
      for (const auto& rec : records) {
        nlohmann::json jm = {{"fingerprint", rec.fingerprint_id},
                             {"corr", rec.corr},
                             {"matched", rec.matched}};
        if (!rec.error.empty()) jm["error"] = rec.error;
        matches.push_back(std::move(jm));
        csv << image << "," << rec.fingerprint_id << "," << rec.corr << ","
            << (rec.matched ? 1 : 0) << "\n";
      }
      results.push_back({{"image", image}, {"matches", std::move(matches)}});
    } catch (const Error& e) {
      errors.push_back({image, e.what()});
    }
  }

  if (opts.format == "csv") {
    emit(csv.str(), opts.output);
  } else {
    const nlohmann::json report = {{"config", config.to_json()},
                                   {"thresholds", thresholds_path},
                                   {"results", std::move(results)},
                                   {"errors", errors_json(errors)}};
    emit(report.dump(2), opts.output);
  }
  return errors.empty() ? 0 : 1;
}

// ---- bench ------------------------------------------------------------

inline int cmd_bench(const std::vector<std::string>& images, int count, int size,
                     const CommonOpts& opts) {
  validate_common(opts);
  std::vector<GrayImage> grays;
  std::vector<ItemError> errors;
  if (images.empty()) {
    SimDbConfig sim;
    const SyntheticDatabase db = gen_database(1, count, size, 0.05, opts.seed, sim);
    for (const auto& img : db.images) grays.push_back(img.gray);
  } else {
    for (const auto& path : images) {
      try {
        GrayImage gray = to_gray_sum(load_image(path));
        if (opts.crop > 0) gray = center_crop(gray, opts.crop);
        grays.push_back(std::move(gray));
      } catch (const Error& e) {
        errors.push_back({path, e.what()});
      }
    }
  }
  if (grays.empty()) throw ValueError("no usable benchmark images");

  using clock = std::chrono::steady_clock;
  const auto median_ms = [&](auto&& filter) {
    std::vector<double> times;
    times.reserve(grays.size());
    for (const auto& gray : grays) {
      const auto t0 = clock::now();
      volatile double sink = filter(gray)(0, 0);  // keep the call alive
      (void)sink;
      times.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
    }
    std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
    return times[times.size() / 2];
  };

  const double sod_ms = median_ms([](const GrayImage& g) { return extract_noise_second_order(g); });
  const double fod_ms = median_ms([](const GrayImage& g) { return extract_noise_fourth_order(g); });
  const double wav_ms =
      median_ms([&](const GrayImage& g) { return extract_noise_wavelet(g, opts.sigma0); });

  if (opts.format == "csv") {
    std::ostringstream csv;
    csv << "filter,median_ms,ratio_vs_sod\n";
    csv << "sod," << sod_ms << ",1\n";
    csv << "fod," << fod_ms << "," << fod_ms / sod_ms << "\n";
    csv << "wavelet," << wav_ms << "," << wav_ms / sod_ms << "\n";
    emit(csv.str(), opts.output);
  } else {
    const nlohmann::json report = {
        {"config", opts.filter_config().to_json()},
        {"images", grays.size()},
        {"median_ms", {{"sod", sod_ms}, {"fod", fod_ms}, {"wavelet", wav_ms}}},
        {"ratio_vs_sod", {{"fod", fod_ms / sod_ms}, {"wavelet", wav_ms / sod_ms}}},
        {"errors", errors_json(errors)}};
    emit(report.dump(2), opts.output);
  }
  return errors.empty() ? 0 : 1;
}

// ---- simgen -----------------------------------------------------------

inline int cmd_simgen(int cameras, int images_per_camera, int size, double strength,
                      double read_noise, double artifact, const CommonOpts& opts) {
  validate_common(opts);
  if (opts.output.empty()) throw ValueError("simgen needs --output DIR");
  SimDbConfig sim;
  sim.read_noise_std = read_noise;
  sim.artifact_strength = artifact;
  SyntheticDatabase db = gen_database(cameras, images_per_camera, size, strength, opts.seed, sim);
  const std::string labels = write_corpus(db, opts.output);
  const nlohmann::json report = {{"config",
                                  {{"cameras", cameras},
                                   {"images_per_camera", images_per_camera},
                                   {"size", size},
                                   {"strength", strength},
                                   {"read_noise_std", read_noise},
                                   {"artifact_strength", artifact},
                                   {"seed", opts.seed}}},
                                 {"labels", labels},
                                 {"images", db.images.size()}};
  std::cout << report.dump(2) << "\n";
  return 0;
}

}  // namespace detail

/// Dispatch a command line. Returns the process exit code: 0 success, 1
/// completed with per-item failures, 2 usage or fatal error.
inline int run(int argc, char** argv) {
  CLI::App app{"Camera sensor-noise fingerprint toolkit"};
  app.require_subcommand(1);

  detail::CommonOpts opts;
  std::vector<std::string> images;
  std::string labels_path, grid_spec = "1,2,5,10,20,40";
  int trials = 2000;
  std::string images_dir, thresholds_path, fingerprint_dir;
  std::vector<std::string> fingerprint_paths;
  int bench_count = 20, bench_size = 1024;
  int sim_cameras = 4, sim_images = 10, sim_size = 256;
  double sim_strength = 0.05, sim_read_noise = 30.0, sim_artifact = 0.015;

  CLI::App* extract = app.add_subcommand("extract", "Extract noise fingerprints from images");
  extract->add_option("images", images, "Input images")->required();
  detail::add_common_flags(extract, opts);

  CLI::App* calibrate =
      app.add_subcommand("calibrate", "Calibrate match thresholds from a labeled corpus");
  calibrate->add_option("labels", labels_path, "labels.csv with path,camera_id")->required();
  calibrate->add_option("--grid", grid_spec, "Fingerprint counts to calibrate")
      ->capture_default_str();
  calibrate->add_option("--trials", trials, "Mismatch trials per cell")->capture_default_str();
  detail::add_common_flags(calibrate, opts);

  CLI::App* cluster = app.add_subcommand("cluster", "Group a database by source camera");
  cluster->add_option("images", images, "Input images");
  cluster->add_option("--images-dir", images_dir, "Directory of images");
  cluster->add_option("--thresholds", thresholds_path, "Threshold table JSON")->required();
  cluster->add_option("--fingerprint-dir", fingerprint_dir,
                      "Write per-group fingerprint files here");
  detail::add_common_flags(cluster, opts);

  CLI::App* match = app.add_subcommand("match", "Match images against suspect fingerprints");
  match->add_option("images", images, "Input images")->required();
  match->add_option("--fingerprints", fingerprint_paths, "Suspect fingerprint files")
      ->required();
  match->add_option("--thresholds", thresholds_path, "Threshold table JSON")->required();
  detail::add_common_flags(match, opts);

  CLI::App* bench = app.add_subcommand("bench", "Time the extraction filters");
  bench->add_option("images", images, "Input images (synthetic when omitted)");
  bench->add_option("--count", bench_count, "Synthetic image count")->capture_default_str();
  bench->add_option("--size", bench_size, "Synthetic image size")->capture_default_str();
  detail::add_common_flags(bench, opts);

  CLI::App* simgen = app.add_subcommand("simgen", "Generate a synthetic labeled corpus");
  simgen->add_option("--cameras", sim_cameras, "Camera count")->capture_default_str();
  simgen->add_option("--images-per-camera", sim_images, "Images per camera")
      ->capture_default_str();
  simgen->add_option("--size", sim_size, "Image size in pixels")->capture_default_str();
  simgen->add_option("--strength", sim_strength, "PRNU strength")->capture_default_str();
  simgen->add_option("--read-noise", sim_read_noise, "Read noise std")->capture_default_str();
  simgen->add_option("--artifact", sim_artifact, "Shared artifact strength")
      ->capture_default_str();
  detail::add_common_flags(simgen, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (extract->parsed()) return detail::cmd_extract(images, opts);
    if (calibrate->parsed()) return detail::cmd_calibrate(labels_path, grid_spec, trials, opts);
    if (cluster->parsed()) {
      return detail::cmd_cluster(images, images_dir, thresholds_path, fingerprint_dir, opts);
    }
    if (match->parsed()) return detail::cmd_match(images, fingerprint_paths, thresholds_path, opts);
    if (bench->parsed()) return detail::cmd_bench(images, bench_count, bench_size, opts);
    if (simgen->parsed()) {
      return detail::cmd_simgen(sim_cameras, sim_images, sim_size, sim_strength, sim_read_noise,
                                sim_artifact, opts);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

/// Test-friendly overload: arguments without the program name.
inline int run(const std::vector<std::string>& args) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("prnu");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  argv.reserve(storage.size());
  for (auto& s : storage) argv.push_back(s.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace prnu::cli
