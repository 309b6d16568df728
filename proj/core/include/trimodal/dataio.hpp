#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trimodal/modalities.hpp"
#include "trimodal/nn/model.hpp"
#include "trimodal/tensor.hpp"

namespace trimodal::dataio {

struct DatasetGeometry {
  std::size_t image_side = 32;
  std::size_t channels = 3;
  std::size_t cognitive_T = 6;
  std::size_t cognitive_features = 3;
  std::size_t biomarker_T = 4;
  std::size_t biomarker_features = 3;
};

struct SubjectRecord {
  std::string id;
  std::optional<Tensor> image;      // [h, w, 3]
  std::optional<Tensor> cognitive;  // [T_c, f_c]
  std::optional<Tensor> biomarker;  // [T_b, f_b]
  int label = 0;
  // generator bookkeeping: which modality signals were replaced by
  // label-independent noise
  std::array<bool, 3> corrupted{false, false, false};
};

struct TrimodalDataset {
  std::vector<SubjectRecord> subjects;
  DatasetGeometry geometry;
  std::string provenance;
  std::uint64_t seed = 0;
};

// Deterministic synthetic stand-in for the restricted clinical datasets.
// Each subject carries a latent severity that drives all three modality
// signals; with probability corruption_rate (independently per modality)
// a signal is replaced by a label-independent draw, so no single modality
// is fully informative.
TrimodalDataset generate_trimodal(std::uint64_t seed, std::size_t n_subjects,
                                  const DatasetGeometry& geometry,
                                  double ad_prevalence = 0.5,
                                  double corruption_rate = 0.15);

// File formats: binary PGM (P5, maxval 255) per image plus a manifest
// CSV `subject_id,image_path,label`; sequence CSVs
// `subject_id,t,f1..fk,label` with complete timesteps 0..T-1 per subject.
void export_dataset(const TrimodalDataset& ds,
                    const std::filesystem::path& workdir);

struct ImageDataset {
  std::vector<std::string> ids;
  std::vector<Tensor> images;  // [h, w, 3], values in [0,1]
  std::vector<int> labels;
};

struct SequenceDataset {
  std::vector<std::string> ids;
  std::vector<Tensor> sequences;  // [T, k]
  std::vector<int> labels;
};

ImageDataset load_image_dataset(const std::filesystem::path& manifest);
SequenceDataset load_sequence_dataset(const std::filesystem::path& csv_path);

// Rebuilds an in-memory dataset from exported files.
TrimodalDataset load_trimodal(const std::filesystem::path& workdir,
                              std::uint64_t seed);

void write_pgm(const std::filesystem::path& path, const Tensor& image);
Tensor read_pgm(const std::filesystem::path& path);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Stratified split; per-class floor counts with leftovers filling the
// splits still under their overall quota, in train/val/test order.
SplitIndices split_dataset(const TrimodalDataset& ds,
                           const std::array<double, 3>& ratios,
                           std::uint64_t seed);

struct NormalizationStats {
  std::vector<double> mean;    // per feature (sequences) / channel (images)
  std::vector<double> stddev;  // floored at 1e-8
  std::string fitted_on = "train";
};

// Moments over the last axis of every sample (population std).
NormalizationStats fit_normalization(const std::vector<Tensor>& samples);
Tensor apply_normalization(const Tensor& x, const NormalizationStats& stats);

// Binary checkpoint, magic "TMF1", little-endian, f32 tensor payloads.
void save_checkpoint(nn::Model& model, const NormalizationStats& stats,
                     std::uint64_t training_seed,
                     const std::filesystem::path& path);

struct LoadedCheckpoint {
  nn::Model model;
  NormalizationStats stats;
  std::uint64_t training_seed = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace trimodal::dataio
