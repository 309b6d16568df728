#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trimodal/dataio.hpp"
#include "trimodal/modalities.hpp"

namespace trimodal::cli {

// Single source of truth for a run. Flags override config fields,
// config fields override these defaults.
struct RunConfig {
  std::uint64_t seed = 42;

  std::size_t n_subjects = 1000;
  dataio::DatasetGeometry geometry;
  double prevalence = 0.5;
  double corruption_rate = 0.15;

  TrainConfig train_image;
  TrainConfig train_cognitive;
  TrainConfig train_biomarker;

  std::string strategy = "weighted";  // weighted|majority|bayes|stacked
  std::optional<std::array<double, 3>> manual_weights;
  double prior = 0.5;

  std::string workdir = "work";
  std::string checkpoint_dir;  // defaults to <workdir>/checkpoints
  std::string report_path;     // defaults to <workdir>/report

  std::vector<std::string> drop_modalities;
};

RunConfig load_config(const std::optional<std::string>& path);

// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
int run_cli(int argc, const char* const* argv);

}  // namespace trimodal::cli
