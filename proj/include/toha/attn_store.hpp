// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

// Reader/writer for the ATTG v1 attention container and the JSON dataset
// manifest.
//
// ATTG v1 layout (all integers and floats little-endian):
//
//   offset  size  field
//        0     4  magic "ATTG"
//        4     2  u16 version = 1
//        6     2  u16 flags = 0
//        8     4  u32 n_layers
//       12     4  u32 n_heads
//       16     4  u32 n_tokens
//       20     4  u32 prompt_len
//       24   ...  float32 payload
//
// The payload holds n_layers * n_heads lower-triangular matrices in
// layer-major, head-minor order. Each matrix is n_tokens packed rows; row i
// contributes the i+1 weights w[i][0..i].

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace toha {

inline constexpr char kAttgMagic[4] = {'A', 'T', 'T', 'G'};
inline constexpr std::uint16_t kAttgVersion = 1;
inline constexpr std::size_t kAttgHeaderSize = 24;
/// Weights outside [0,1] by at most this much are clamped on read.
inline constexpr double kWeightClampTolerance = 1e-4;

struct HeadId {
  std::uint32_t layer = 0;
  std::uint32_t head = 0;

  friend auto operator<=>(const HeadId&, const HeadId&) = default;
};

constexpr std::size_t packed_triangle_size(std::size_t n) { return n * (n + 1) / 2; }

/// Read-only view of one packed lower-triangular attention map.
class TriangularView {
 public:
  TriangularView(std::span<const float> packed, std::size_t n) : packed_(packed), n_(n) {}

  std::size_t size() const { return n_; }

  /// w[i][j] for j <= i.
  float operator()(std::size_t i, std::size_t j) const { return packed_[i * (i + 1) / 2 + j]; }

  std::span<const float> row(std::size_t i) const { return packed_.subspan(i * (i + 1) / 2, i + 1); }

  std::span<const float> packed() const { return packed_; }

 private:
  std::span<const float> packed_;
  std::size_t n_;
};

struct ContainerHeader {
  std::uint32_t n_layers = 0;
  std::uint32_t n_heads = 0;
  std::uint32_t n_tokens = 0;
  std::uint32_t prompt_len = 0;

  std::size_t payload_floats() const {
    return std::size_t{n_layers} * n_heads * packed_triangle_size(n_tokens);
  }

  friend bool operator==(const ContainerHeader&, const ContainerHeader&) = default;
};

/// Attention maps of every (layer, head) for one prompt+response sample.
/// Tokens [0, prompt_len) are the prompt, the rest the response.
struct AttentionContainer {
  std::uint32_t n_layers = 0;
  std::uint32_t n_heads = 0;
  std::uint32_t n_tokens = 0;
  std::uint32_t prompt_len = 0;
  std::vector<float> weights;

  ContainerHeader header() const { return {n_layers, n_heads, n_tokens, prompt_len}; }
  std::size_t matrix_floats() const { return packed_triangle_size(n_tokens); }

  TriangularView map(std::uint32_t layer, std::uint32_t head) const;
  std::span<float> mutable_map(std::uint32_t layer, std::uint32_t head);

  /// Throws ValidationError when a structural invariant or weight range
  /// ([0,1], finite) does not hold.
  void validate() const;

  friend bool operator==(const AttentionContainer&, const AttentionContainer&) = default;
};

/// Allocates a zero-filled container with the given shape.
AttentionContainer make_container(std::uint32_t n_layers, std::uint32_t n_heads, std::uint32_t n_tokens,
                                  std::uint32_t prompt_len);

std::vector<unsigned char> encode_container(const AttentionContainer& c);
AttentionContainer decode_container(std::span<const unsigned char> bytes);
ContainerHeader decode_header(std::span<const unsigned char> bytes);

void write_container(const AttentionContainer& c, const std::filesystem::path& destination);
AttentionContainer read_container(const std::filesystem::path& source);
/// Reads only the 24 header bytes.
ContainerHeader read_container_header(const std::filesystem::path& source);

struct SampleEntry {
  std::string id;
  std::string path;  // relative to the manifest's directory
  std::optional<int> label;  // 1 = hallucinated, 0 = grounded
  std::uint32_t n_tokens = 0;
  std::uint32_t prompt_len = 0;

  friend bool operator==(const SampleEntry&, const SampleEntry&) = default;
};

struct Manifest {
  std::string model_name;
  std::uint32_t n_layers = 0;
  std::uint32_t n_heads = 0;
  std::vector<SampleEntry> samples;

  const SampleEntry* find(const std::string& id) const;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& m, const std::filesystem::path& path);

/// Opens the container behind `entry` and checks its header against the
/// manifest. Path resolution is relative to `manifest_dir`.
AttentionContainer open_sample(const Manifest& m, const SampleEntry& entry,
                               const std::filesystem::path& manifest_dir);

}  // namespace toha
