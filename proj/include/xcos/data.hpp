#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xcos/rng.hpp"
#include "xcos/tensor.hpp"

namespace xcos {

// 8-bit RGB image with an identity label, pixels in row-major (y, x, channel).
struct ImageRecord {
  int identity_id = -1;
  int height = 0;
  int width = 0;
  std::vector<uint8_t> pixels;

  size_t pixel_count() const { return static_cast<size_t>(height) * width * 3; }
};

struct Dataset {
  std::vector<ImageRecord> images;
  int num_identities = 0;

  std::vector<int> indices_of(int identity) const;
  std::vector<int> all_indices() const;
};

// (v - 127.5) / 128 per channel, laid out channel-major (3, H, W).
Tensor normalize(const ImageRecord& img);

// Exact inverse of normalize; rejects values that do not map back to [0, 255].
ImageRecord denormalize(const Tensor& img, int identity_id = -1);

// Mirrors the width axis of a (3, H, W) tensor.
Tensor hflip(const Tensor& img);

// Applies hflip with probability 0.5.
Tensor random_hflip(const Tensor& img, Rng& rng);

struct SynthConfig {
  int identities = 20;
  int images_per_identity = 30;
  int height = 56;
  int width = 56;
  double intra_class_noise = 0.05;  // gaussian sigma as a fraction of 255
  int max_translation = 4;          // pixels, per axis
  uint64_t rng_seed = 0;

  void validate() const;
};

// Procedural identity dataset: per identity a smooth random field plus
// geometric blobs; per image a small translation and pixel noise.
Dataset synth_identities(const SynthConfig& cfg);

struct PairRecord {
  int index_a = -1;
  int index_b = -1;
  bool label = false;  // same identity
};

// Exactly n_pos same-identity and n_neg cross-identity pairs without
// repetition, drawn from the subset (global dataset indices). Throws with
// the achievable maxima when the request cannot be met.
std::vector<PairRecord> sample_pairs(const Dataset& data, const std::vector<int>& subset,
                                     int n_pos, int n_neg, Rng& rng);
std::vector<PairRecord> sample_pairs(const Dataset& data, int n_pos, int n_neg, Rng& rng);

struct OcclusionMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> cells;  // 1 = occluded

  double coverage() const;
  bool at(int y, int x) const { return cells[static_cast<size_t>(y) * width + x] != 0; }
};

// Brush-stroke random-walk mask covering the requested area fraction.
OcclusionMask free_form_mask(int height, int width, double coverage, Rng& rng);

// Sets occluded cells of a (3, H, W) image to `fill` in every channel.
Tensor apply_mask(const Tensor& img, const OcclusionMask& mask, double fill = 0.0);

struct LoadedPair {
  ImageRecord image_a;
  ImageRecord image_b;
  bool label = false;
  std::string path_a;
  std::string path_b;
};

// Reads "path_a<TAB>path_b<TAB>{0|1}" lines; relative paths resolve against
// the list file's directory.
std::vector<LoadedPair> load_pair_list(const std::filesystem::path& path);

// Directory tree persistence: one zero-padded subdirectory per identity,
// zero-padded numeric image filenames.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace xcos
