// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic attention dumps with planted hallucination-sensitive heads.
//
// Every response row puts most of its mass on one "anchor" prompt token and
// spreads the rest thinly, so the forest edge of that response token is the
// anchor edge with length ~ level. The level of a (sample, head) is
//
//   base_level + separation * [planted head and hallucinated] + sample_noise * z
//
// and each row adds token_noise * z' on top. Non-planted heads are drawn from
// the same distribution for both classes. Prompt rows concentrate a
// per-sample fraction c ~ U(0, prompt_noise) on the previous token, which
// moves prompt-prompt distances without touching prompt-response ones.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "toha/attn_store.hpp"

namespace toha {

struct SyntheticSpec {
  std::string model_name = "synthetic";
  std::uint32_t n_layers = 4;
  std::uint32_t n_heads = 4;
  std::uint32_t n_samples = 100;
  std::uint32_t n_tokens_min = 18;
  std::uint32_t n_tokens_max = 28;
  std::uint32_t prompt_len_min = 6;
  std::uint32_t prompt_len_max = 12;
  std::vector<HeadId> planted_heads;
  double separation = 0.3;
  double label_balance = 0.5;  // fraction hallucinated
  std::uint64_t seed = 0;
  double base_level = 0.35;
  double sample_noise = 0.1;
  double token_noise = 0.05;
  double prompt_noise = 0.0;

  /// Throws ValidationError for out-of-grid planted heads, infeasible
  /// ranges, or base_level + separation > 1.
  void validate() const;
};

SyntheticSpec synthetic_spec_from_json(const std::string& text);
std::string synthetic_spec_to_json(const SyntheticSpec& spec);

/// Deterministic for a fixed spec; sample i depends only on (seed, i).
AttentionContainer synthesize_sample(const SyntheticSpec& spec, std::uint32_t index, int label);

/// Class labels for all samples: round(n_samples * label_balance)
/// hallucinated, shuffled by seed.
std::vector<int> synthetic_labels(const SyntheticSpec& spec);

/// Writes DIR/manifest.json and DIR/samples/<id>.attg.
Manifest write_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& dir, int threads = 1);

}  // namespace toha
