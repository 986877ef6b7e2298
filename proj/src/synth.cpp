// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

#include "toha/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <random>

#include <omp.h>

#include "json.hpp"
#include "toha/error.hpp"

namespace toha {

namespace fs = std::filesystem;
using nlohmann::json;

void SyntheticSpec::validate() const {
  if (n_layers == 0 || n_heads == 0) throw ValidationError("synthetic spec needs at least one layer and head");
  if (n_samples == 0) throw ValidationError("synthetic spec needs at least one sample");
  if (prompt_len_min == 0 || prompt_len_min > prompt_len_max) throw ValidationError("bad prompt_len range");
  if (n_tokens_min > n_tokens_max) throw ValidationError("bad n_tokens range");
  if (prompt_len_max >= n_tokens_min) {
    throw ValidationError("prompt_len range must stay below n_tokens range (need a response token)");
  }
  for (const auto& h : planted_heads) {
    if (h.layer >= n_layers || h.head >= n_heads) {
      throw ValidationError("planted head (" + std::to_string(h.layer) + ", " + std::to_string(h.head) +
                            ") outside the grid");
    }
  }
  if (!(separation >= 0.0 && separation < 1.0)) throw ValidationError("separation must be in [0,1)");
  if (!(label_balance > 0.0 && label_balance < 1.0)) throw ValidationError("label_balance must be in (0,1)");
  if (!(base_level >= 0.0 && base_level <= 1.0)) throw ValidationError("base_level must be in [0,1]");
  if (base_level + separation > 1.0) throw ValidationError("infeasible: base_level + separation > 1");
  if (sample_noise < 0.0 || token_noise < 0.0) throw ValidationError("noise levels must be non-negative");
  if (!(prompt_noise >= 0.0 && prompt_noise <= 1.0)) throw ValidationError("prompt_noise must be in [0,1]");
}

SyntheticSpec synthetic_spec_from_json(const std::string& text) {
  SyntheticSpec s;
  try {
    json j = json::parse(text);
    s.model_name = j.value("model_name", s.model_name);
    s.n_layers = j.at("n_layers").get<std::uint32_t>();
    s.n_heads = j.at("n_heads").get<std::uint32_t>();
    s.n_samples = j.at("n_samples").get<std::uint32_t>();
    if (j.contains("n_tokens")) {
      s.n_tokens_min = j["n_tokens"].at(0).get<std::uint32_t>();
      s.n_tokens_max = j["n_tokens"].at(1).get<std::uint32_t>();
    }
    if (j.contains("prompt_len")) {
      s.prompt_len_min = j["prompt_len"].at(0).get<std::uint32_t>();
      s.prompt_len_max = j["prompt_len"].at(1).get<std::uint32_t>();
    }
    for (const auto& h : j.value("planted_heads", json::array())) {
      s.planted_heads.push_back({h.at(0).get<std::uint32_t>(), h.at(1).get<std::uint32_t>()});
    }
    s.separation = j.value("separation", s.separation);
    s.label_balance = j.value("label_balance", s.label_balance);
    s.seed = j.value("seed", s.seed);
    s.base_level = j.value("base_level", s.base_level);
    s.sample_noise = j.value("sample_noise", s.sample_noise);
    s.token_noise = j.value("token_noise", s.token_noise);
    s.prompt_noise = j.value("prompt_noise", s.prompt_noise);
  } catch (const json::exception& e) {
    throw FormatError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string synthetic_spec_to_json(const SyntheticSpec& s) {
  json planted = json::array();
  for (const auto& h : s.planted_heads) planted.push_back({h.layer, h.head});
  json j = {{"model_name", s.model_name},
            {"n_layers", s.n_layers},
            {"n_heads", s.n_heads},
            {"n_samples", s.n_samples},
            {"n_tokens", {s.n_tokens_min, s.n_tokens_max}},
            {"prompt_len", {s.prompt_len_min, s.prompt_len_max}},
            {"planted_heads", planted},
            {"separation", s.separation},
            {"label_balance", s.label_balance},
            {"seed", s.seed},
            {"base_level", s.base_level},
            {"sample_noise", s.sample_noise},
            {"token_noise", s.token_noise},
            {"prompt_noise", s.prompt_noise}};
  return j.dump(2) + "\n";
}

namespace {

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), index, 0x70a4u};
  return std::mt19937_64(seq);
}

// Fills row[0..i] with `anchor_mass` on `anchor` and the remaining mass
// spread over the other entries with random weights in [0.5, 1.5].
void fill_row(std::span<float> row, std::size_t anchor, double anchor_mass, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> spread(0.5, 1.5);
  std::vector<double> w(row.size(), 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (j == anchor) continue;
    w[j] = spread(rng);
    total += w[j];
  }
  if (total == 0.0) {
    row[anchor] = 1.0f;
    return;
  }
  const double rest = 1.0 - anchor_mass;
  for (std::size_t j = 0; j < row.size(); ++j) {
    row[j] = j == anchor ? static_cast<float>(anchor_mass) : static_cast<float>(rest * w[j] / total);
  }
}

}  // namespace

std::vector<int> synthetic_labels(const SyntheticSpec& spec) {
  const auto n_hallu = static_cast<std::size_t>(std::llround(spec.n_samples * spec.label_balance));
  std::vector<int> labels(spec.n_samples, 0);
  std::fill_n(labels.begin(), std::min<std::size_t>(n_hallu, labels.size()), 1);
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

AttentionContainer synthesize_sample(const SyntheticSpec& spec, std::uint32_t index, int label) {
  auto rng = sample_rng(spec.seed, index);
  const auto n = std::uniform_int_distribution<std::uint32_t>(spec.n_tokens_min, spec.n_tokens_max)(rng);
  const auto p = std::uniform_int_distribution<std::uint32_t>(spec.prompt_len_min, spec.prompt_len_max)(rng);
  AttentionContainer c = make_container(spec.n_layers, spec.n_heads, n, p);

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<std::uint32_t> pick_prompt(0, p - 1);
  const double prompt_focus =
      spec.prompt_noise > 0.0 ? std::uniform_real_distribution<double>(0.0, spec.prompt_noise)(rng) : 0.0;

  for (std::uint32_t layer = 0; layer < spec.n_layers; ++layer) {
    for (std::uint32_t head = 0; head < spec.n_heads; ++head) {
      const bool planted = std::find(spec.planted_heads.begin(), spec.planted_heads.end(),
                                     HeadId{layer, head}) != spec.planted_heads.end();
      const double level = spec.base_level + (planted && label == 1 ? spec.separation : 0.0) +
                           spec.sample_noise * gauss(rng);
      auto packed = c.mutable_map(layer, head);

      packed[0] = 1.0f;
      for (std::uint32_t i = 1; i < p; ++i) {
        fill_row(packed.subspan(std::size_t{i} * (i + 1) / 2, i + 1), i - 1, prompt_focus, rng);
      }
      for (std::uint32_t i = p; i < n; ++i) {
        const double tok_level = std::clamp(level + spec.token_noise * gauss(rng), 0.01, 0.99);
        fill_row(packed.subspan(std::size_t{i} * (i + 1) / 2, i + 1), pick_prompt(rng), 1.0 - tok_level, rng);
      }
    }
  }
  for (auto& w : c.weights) w = std::clamp(w, 0.0f, 1.0f);
  return c;
}

Manifest write_synthetic_dataset(const SyntheticSpec& spec, const fs::path& dir, int threads) {
  spec.validate();
  fs::create_directories(dir / "samples");
  const auto labels = synthetic_labels(spec);

  Manifest m;
  m.model_name = spec.model_name;
  m.n_layers = spec.n_layers;
  m.n_heads = spec.n_heads;
  m.samples.resize(spec.n_samples);

  std::exception_ptr failure;
#pragma omp parallel for num_threads(std::max(threads, 1)) schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(spec.n_samples); ++i) {
    try {
      const auto idx = static_cast<std::uint32_t>(i);
      char id[32];
      std::snprintf(id, sizeof id, "s%06u", idx);
      AttentionContainer c = synthesize_sample(spec, idx, labels[idx]);
      SampleEntry& e = m.samples[idx];
      e.id = id;
      e.path = std::string("samples/") + id + ".attg";
      e.label = labels[idx];
      e.n_tokens = c.n_tokens;
      e.prompt_len = c.prompt_len;
      write_container(c, dir / e.path);
    } catch (...) {
#pragma omp critical(toha_synth_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  write_manifest(m, dir / "manifest.json");
  return m;
}

}  // namespace toha
