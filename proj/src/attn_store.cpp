// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

#include "toha/attn_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "toha/error.hpp"
#include "toha/io_util.hpp"

namespace toha {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<unsigned char>((v >> shift) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

void check_shape(const ContainerHeader& h) {
  if (h.n_layers == 0 || h.n_heads == 0) throw ValidationError("container needs at least one layer and head");
  if (h.prompt_len == 0 || h.prompt_len >= h.n_tokens) {
    throw ValidationError("need 0 < prompt_len < n_tokens, got prompt_len=" + std::to_string(h.prompt_len) +
                          " n_tokens=" + std::to_string(h.n_tokens));
  }
}

bool valid_sample_id(const std::string& id) {
  return !id.empty() && id.find_first_of(",\"\n\r") == std::string::npos;
}

}  // namespace

TriangularView AttentionContainer::map(std::uint32_t layer, std::uint32_t head) const {
  if (layer >= n_layers || head >= n_heads) throw ValidationError("(layer, head) out of range");
  std::size_t m = matrix_floats();
  std::size_t offset = (std::size_t{layer} * n_heads + head) * m;
  return TriangularView(std::span<const float>(weights).subspan(offset, m), n_tokens);
}

std::span<float> AttentionContainer::mutable_map(std::uint32_t layer, std::uint32_t head) {
  if (layer >= n_layers || head >= n_heads) throw ValidationError("(layer, head) out of range");
  std::size_t m = matrix_floats();
  std::size_t offset = (std::size_t{layer} * n_heads + head) * m;
  return std::span<float>(weights).subspan(offset, m);
}

void AttentionContainer::validate() const {
  check_shape(header());
  if (weights.size() != header().payload_floats()) {
    throw ValidationError("payload holds " + std::to_string(weights.size()) + " floats, expected " +
                          std::to_string(header().payload_floats()));
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    float w = weights[i];
    if (!std::isfinite(w) || w < 0.0f || w > 1.0f) {
      throw ValidationError("weight " + std::to_string(w) + " at payload index " + std::to_string(i) +
                            " outside [0,1]");
    }
  }
}

AttentionContainer make_container(std::uint32_t n_layers, std::uint32_t n_heads, std::uint32_t n_tokens,
                                  std::uint32_t prompt_len) {
  AttentionContainer c{n_layers, n_heads, n_tokens, prompt_len, {}};
  check_shape(c.header());
  c.weights.assign(c.header().payload_floats(), 0.0f);
  return c;
}

std::vector<unsigned char> encode_container(const AttentionContainer& c) {
  c.validate();
  std::vector<unsigned char> out;
  out.reserve(kAttgHeaderSize + 4 * c.weights.size());
  out.insert(out.end(), std::begin(kAttgMagic), std::end(kAttgMagic));
  put_u16(out, kAttgVersion);
  put_u16(out, 0);
  put_u32(out, c.n_layers);
  put_u32(out, c.n_heads);
  put_u32(out, c.n_tokens);
  put_u32(out, c.prompt_len);
  for (float w : c.weights) put_u32(out, std::bit_cast<std::uint32_t>(w));
  return out;
}

ContainerHeader decode_header(std::span<const unsigned char> bytes) {
  if (bytes.size() < kAttgHeaderSize) throw FormatError("truncated header");
  if (std::memcmp(bytes.data(), kAttgMagic, 4) != 0) throw FormatError("bad magic");
  std::uint16_t version = get_u16(bytes.data() + 4);
  if (version != kAttgVersion) throw FormatError("unsupported version " + std::to_string(version));
  std::uint16_t flags = get_u16(bytes.data() + 6);
  if (flags != 0) throw FormatError("unsupported flags " + std::to_string(flags));
  ContainerHeader h{get_u32(bytes.data() + 8), get_u32(bytes.data() + 12), get_u32(bytes.data() + 16),
                    get_u32(bytes.data() + 20)};
  try {
    check_shape(h);
  } catch (const ValidationError& e) {
    throw FormatError(e.what());
  }
  return h;
}

AttentionContainer decode_container(std::span<const unsigned char> bytes) {
  ContainerHeader h = decode_header(bytes);
  std::size_t n = h.payload_floats();
  std::size_t available = (bytes.size() - kAttgHeaderSize) / 4;
  if (available < n || bytes.size() - kAttgHeaderSize < 4 * n) {
    throw FormatError("truncated payload: " + std::to_string(available) + " of " + std::to_string(n) + " floats");
  }
  if (bytes.size() - kAttgHeaderSize != 4 * n) throw FormatError("trailing bytes after payload");

  AttentionContainer c{h.n_layers, h.n_heads, h.n_tokens, h.prompt_len, {}};
  c.weights.resize(n);
  const unsigned char* p = bytes.data() + kAttgHeaderSize;
  for (std::size_t i = 0; i < n; ++i, p += 4) {
    float w = std::bit_cast<float>(get_u32(p));
    if (!std::isfinite(w)) throw FormatError("non-finite weight at payload index " + std::to_string(i));
    if (w < 0.0f || w > 1.0f) {
      double excess = w < 0.0f ? -double{w} : double{w} - 1.0;
      if (excess > kWeightClampTolerance) {
        throw FormatError("weight " + std::to_string(w) + " at payload index " + std::to_string(i) +
                          " out of range");
      }
      w = std::clamp(w, 0.0f, 1.0f);
    }
    c.weights[i] = w;
  }
  return c;
}

void write_container(const AttentionContainer& c, const fs::path& destination) {
  auto bytes = encode_container(c);
  write_file_atomic(destination,
                    std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

AttentionContainer read_container(const fs::path& source) {
  std::string raw = read_file(source);
  return decode_container(std::span(reinterpret_cast<const unsigned char*>(raw.data()), raw.size()));
}

ContainerHeader read_container_header(const fs::path& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw IoError("cannot open " + source.string());
  unsigned char buf[kAttgHeaderSize];
  in.read(reinterpret_cast<char*>(buf), kAttgHeaderSize);
  return decode_header(std::span<const unsigned char>(buf, static_cast<std::size_t>(in.gcount())));
}

// -- manifest -----------------------------------------------------------------

const SampleEntry* Manifest::find(const std::string& id) const {
  for (const auto& s : samples) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

std::string manifest_to_json(const Manifest& m) {
  json samples = json::array();
  for (const auto& s : m.samples) {
    json e = {{"id", s.id}, {"path", s.path}, {"n_tokens", s.n_tokens}, {"prompt_len", s.prompt_len}};
    if (s.label) e["label"] = *s.label;
    samples.push_back(std::move(e));
  }
  json j = {{"model_name", m.model_name}, {"n_layers", m.n_layers}, {"n_heads", m.n_heads}, {"samples", samples}};
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  Manifest m;
  try {
    m.model_name = j.at("model_name").get<std::string>();
    m.n_layers = j.at("n_layers").get<std::uint32_t>();
    m.n_heads = j.at("n_heads").get<std::uint32_t>();
    std::unordered_set<std::string> seen;
    for (const auto& e : j.at("samples")) {
      SampleEntry s;
      s.id = e.at("id").get<std::string>();
      s.path = e.at("path").get<std::string>();
      s.n_tokens = e.at("n_tokens").get<std::uint32_t>();
      s.prompt_len = e.at("prompt_len").get<std::uint32_t>();
      if (auto it = e.find("label"); it != e.end() && !it->is_null()) {
        int label = it->get<int>();
        if (label != 0 && label != 1) throw ValidationError("sample " + s.id + ": label must be 0 or 1");
        s.label = label;
      }
      if (!valid_sample_id(s.id)) throw ValidationError("invalid sample id '" + s.id + "'");
      if (!seen.insert(s.id).second) throw ValidationError("duplicate sample id '" + s.id + "'");
      if (s.prompt_len == 0 || s.prompt_len >= s.n_tokens) {
        throw ValidationError("sample " + s.id + ": need 0 < prompt_len < n_tokens");
      }
      m.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest schema error: ") + e.what());
  }
  return m;
}

Manifest read_manifest(const fs::path& path) { return manifest_from_json(read_file(path)); }

void write_manifest(const Manifest& m, const fs::path& path) { write_file_atomic(path, manifest_to_json(m)); }

AttentionContainer open_sample(const Manifest& m, const SampleEntry& entry, const fs::path& manifest_dir) {
  fs::path p = manifest_dir / entry.path;
  std::error_code ec;
  if (!fs::exists(p, ec)) throw IoError("sample " + entry.id + ": dangling path " + p.string());
  AttentionContainer c = read_container(p);
  ContainerHeader expected{m.n_layers, m.n_heads, entry.n_tokens, entry.prompt_len};
  if (c.header() != expected) {
    throw ValidationError("sample " + entry.id + ": container header does not match manifest");
  }
  return c;
}

}  // namespace toha
