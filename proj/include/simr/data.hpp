#pragma once

// Measurement model (restriction + bicubic pseudo high-resolution field),
// train/test splitting and the SNO1 snapshot file format.
//
// SNO1 layout, little-endian:
//   "SNO1" | u32 version=1 | u32 N | u32 H | u32 W | N*H*W float32 row-major
//   | u32 json_length | json_length bytes of UTF-8 metadata

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "simr/ops.hpp"
#include "simr/tensor.hpp"

namespace simr {

struct SnapshotDataset {
  std::size_t n = 0, h = 0, w = 0;
  std::vector<float> fields;  // n*h*w
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t plane() const { return h * w; }
  /// Snapshot i as an [h,w] tensor.
  Tensor<float> snapshot(std::size_t i) const;
  void validate() const;
};

struct SamplePair {
  std::size_t index = 0;  // snapshot index in the source dataset
  Tensor<float> coarse;     // [r_c, r_c]
  Tensor<float> pseudo_hr;  // [n, n]
  Tensor<float> truth;      // [n, n]
};

enum class SplitOrdering { sequential, seeded_shuffle };

struct SplitSpec {
  std::size_t n_train = 800;
  std::size_t n_test = 201;
  SplitOrdering ordering = SplitOrdering::sequential;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// out(i,j) = field(i*H/r_c, j*W/r_c) for a rank-2 field.
template <typename T>
Tensor<T> restrict_field(const Tensor<T>& field, std::size_t r_c);

/// Bicubic resize of a rank-2 coarse field to n x n.
Tensor<float> make_pseudo_hr(const Tensor<float>& coarse, std::size_t n,
                             GridMapping mapping = GridMapping::half_pixel);

/// One pair per snapshot, restricting to r_c x r_c (stride H / r_c).
std::vector<SamplePair> build_pairs(const SnapshotDataset& dataset, std::size_t r_c);

Split split(std::size_t n, const SplitSpec& spec);

template <typename U>
std::vector<U> select(const std::vector<U>& items, const std::vector<std::size_t>& idx) {
  std::vector<U> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(items.at(i));
  return out;
}

void save_dataset(const SnapshotDataset& dataset, const std::filesystem::path& path);
SnapshotDataset load_dataset(const std::filesystem::path& path);

/// Parse an in-memory SNO1 image.
SnapshotDataset parse_dataset(const std::vector<std::uint8_t>& bytes);

/// FNV-1a 64-bit digest of a file, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);
std::string bytes_digest(const std::string& bytes);

}  // namespace simr
