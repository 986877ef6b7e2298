// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

#include "toha/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <set>
#include <unordered_set>

#include <omp.h>

#include "json.hpp"
#include "toha/error.hpp"
#include "toha/io_util.hpp"

namespace toha {

namespace fs = std::filesystem;
using nlohmann::json;

// -- divergence -----------------------------------------------------------------

DivergenceRun compute_divergence_cache(const fs::path& manifest_path, const DivergenceOptions& options) {
  const Manifest manifest = read_manifest(manifest_path);
  const fs::path dir = manifest_path.parent_path();
  const std::size_t per_sample = std::size_t{manifest.n_layers} * manifest.n_heads;
  const std::size_t chunk = std::max<std::size_t>(options.chunk_samples, 1);
  const int threads = options.serial_reference ? 1 : std::max(options.threads, 1);

  DivergenceRun run;
  run.cache.rows.reserve(manifest.samples.size() * per_sample);

  for (std::size_t begin = 0; begin < manifest.samples.size(); begin += chunk) {
    const std::size_t end = std::min(begin + chunk, manifest.samples.size());
    const auto count = static_cast<std::int64_t>(end - begin);
    std::vector<std::optional<AttentionContainer>> loaded(end - begin);
    std::vector<std::string> errors(end - begin);

#pragma omp parallel for num_threads(threads) schedule(dynamic)
    for (std::int64_t i = 0; i < count; ++i) {
      const auto k = static_cast<std::size_t>(i);
      try {
        loaded[k] = open_sample(manifest, manifest.samples[begin + k], dir);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }

    std::vector<const AttentionContainer*> batch;
    std::vector<std::size_t> batch_sample;
    for (std::size_t k = 0; k < loaded.size(); ++k) {
      if (loaded[k]) {
        batch.push_back(&*loaded[k]);
        batch_sample.push_back(begin + k);
      } else {
        run.failures.push_back({manifest.samples[begin + k].id, errors[k]});
      }
    }

    std::vector<DivergenceCell> cells(batch.size() * per_sample);
    if (options.serial_reference) {
      compute_divergences_serial(batch, options.variant, cells);
    } else {
      compute_divergences_parallel(batch, options.variant, cells, threads);
    }

    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& id = manifest.samples[batch_sample[b]].id;
      for (std::size_t t = 0; t < per_sample; ++t) {
        const auto& cell = cells[b * per_sample + t];
        run.cache.rows.push_back({id, static_cast<std::uint32_t>(t / manifest.n_heads),
                                  static_cast<std::uint32_t>(t % manifest.n_heads), cell.n_response, cell.raw,
                                  cell.normalized});
      }
    }
  }
  return run;
}

int cmd_divergence(const fs::path& manifest_path, const fs::path& out, const DivergenceOptions& options) {
  DivergenceRun run = compute_divergence_cache(manifest_path, options);
  write_cache(run.cache, out);

  fs::path sidecar = out;
  sidecar += ".errors";
  if (run.failures.empty()) {
    std::error_code ec;
    fs::remove(sidecar, ec);
    return kExitOk;
  }
  std::string log;
  for (const auto& f : run.failures) log += f.sample_id + "\t" + f.message + "\n";
  write_file_atomic(sidecar, log);
  return kExitPartial;
}

// -- select -------------------------------------------------------------------

namespace {

json head_json(const HeadId& h) { return json::array({h.layer, h.head}); }

HeadId head_from_json(const json& j) { return {j.at(0).get<std::uint32_t>(), j.at(1).get<std::uint32_t>()}; }

std::string compute_digest(const DivergenceCache& cache, const std::vector<std::string>& probe_ids,
                           std::size_t n_max, std::uint64_t seed) {
  std::string canonical = "cache=" + hex64(fnv1a64(cache.to_csv()));
  canonical += ";probe=";
  for (const auto& id : probe_ids) canonical += id + ",";
  canonical += ";n_max=" + std::to_string(n_max) + ";seed=" + std::to_string(seed);
  return hex64(fnv1a64(canonical));
}

}  // namespace

std::string SelectionReport::to_json() const {
  json ranked = json::array();
  for (const auto& h : result.ranked_heads) ranked.push_back(head_json(h));
  json j = {{"ranked_heads", ranked},
            {"deltas", result.deltas},
            {"n_opt", result.n_opt},
            {"n_max", result.n_max},
            {"best_auroc", result.best_auroc},
            {"probe_auroc_trace", result.probe_auroc_trace},
            {"probe_balance", {{"hallucinated", result.balance.hallucinated}, {"grounded", result.balance.grounded}}},
            {"probe_ids", probe_ids},
            {"seed", seed},
            {"config_digest", config_digest},
            {"warnings", result.warnings}};
  return j.dump(2) + "\n";
}

SelectionReport SelectionReport::from_json(const std::string& text) {
  SelectionReport r;
  try {
    json j = json::parse(text);
    for (const auto& h : j.at("ranked_heads")) r.result.ranked_heads.push_back(head_from_json(h));
    r.result.deltas = j.at("deltas").get<std::vector<double>>();
    r.result.n_opt = j.at("n_opt").get<std::size_t>();
    r.result.n_max = j.value("n_max", r.result.n_opt);
    r.result.probe_auroc_trace = j.at("probe_auroc_trace").get<std::vector<double>>();
    r.result.best_auroc = j.value("best_auroc", 0.0);
    if (auto it = j.find("probe_balance"); it != j.end()) {
      r.result.balance.hallucinated = it->value("hallucinated", std::size_t{0});
      r.result.balance.grounded = it->value("grounded", std::size_t{0});
    }
    r.probe_ids = j.value("probe_ids", std::vector<std::string>{});
    r.seed = j.value("seed", std::uint64_t{0});
    r.config_digest = j.value("config_digest", std::string{});
    r.result.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw FormatError(std::string("selection report: ") + e.what());
  }
  if (r.result.n_opt == 0 || r.result.n_opt > r.result.ranked_heads.size()) {
    throw ValidationError("selection report: n_opt out of range");
  }
  if (r.result.deltas.size() != r.result.ranked_heads.size()) {
    throw ValidationError("selection report: deltas and ranked_heads differ in length");
  }
  return r;
}

SelectionReport run_select(const DivergenceCache& cache, const LabelMap& labels,
                           const std::vector<std::string>& probe_ids, std::size_t n_max, std::uint64_t seed,
                           int threads) {
  if (probe_ids.empty()) throw ValidationError("probe set is empty");
  DivergenceTable table = build_table(cache, probe_ids, labels);
  SelectionReport report;
  report.result = select_heads(table, n_max, threads);
  report.probe_ids = probe_ids;
  report.seed = seed;
  report.config_digest = compute_digest(cache, probe_ids, n_max, seed);
  return report;
}

ProbeTestSplit make_split(const DivergenceCache& cache, const LabelMap& labels, std::uint64_t seed,
                          double test_fraction, std::size_t probe_size) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("split fraction must be in (0,1)");
  std::vector<std::string> pool;
  for (const auto& id : cache.sample_ids()) {
    if (auto it = labels.find(id); it != labels.end() && it->second) pool.push_back(id);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(pool.size())));
  ProbeTestSplit split;
  split.test.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_test));
  const std::size_t n_probe = std::min(probe_size, pool.size() - n_test);
  split.probe.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_test),
                     pool.begin() + static_cast<std::ptrdiff_t>(n_test + n_probe));
  return split;
}

// -- score / eval -------------------------------------------------------------

ScoreList run_score(const DivergenceCache& cache, const SelectionReport& selection,
                    const std::vector<std::string>& test_ids) {
  if (test_ids.empty()) throw ValidationError("test set is empty");
  std::unordered_set<std::string> probe(selection.probe_ids.begin(), selection.probe_ids.end());
  for (const auto& id : test_ids) {
    if (probe.count(id)) throw ValidationError("sample " + id + " is in both the probe and the test set");
  }
  DivergenceTable table = build_table(cache, test_ids, {});
  std::vector<double> scores = predict(table, selection.result);
  ScoreList out;
  out.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out.emplace_back(table.samples[i], scores[i]);
  return out;
}

std::string scores_to_csv(const ScoreList& scores) {
  std::string out = "sample_id,score\n";
  for (const auto& [id, s] : scores) out += id + "," + format_double(s) + "\n";
  return out;
}

ScoreList scores_from_csv(const std::string& text) {
  auto lines = split(text, '\n');
  if (lines.empty() || lines.front() != "sample_id,score") throw FormatError("scores file: missing or bad header");
  ScoreList out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split(lines[i], ',');
    if (f.size() != 2) throw FormatError("scores file: line " + std::to_string(i + 1) + " needs 2 fields");
    out.emplace_back(std::string(f[0]), parse_double(f[1]));
  }
  return out;
}

std::string EvalMetrics::to_json() const {
  json j = {{"auroc", auroc}, {"n_pos", n_pos}, {"n_neg", n_neg}};
  return j.dump(2) + "\n";
}

EvalMetrics run_eval(const ScoreList& scores, const LabelMap& labels) {
  if (scores.empty()) throw ValidationError("no scores to evaluate");
  std::vector<int> y;
  std::vector<double> s;
  for (const auto& [id, score] : scores) {
    auto it = labels.find(id);
    if (it == labels.end() || !it->second) throw ValidationError("sample " + id + " has no label");
    y.push_back(*it->second);
    s.push_back(score);
  }
  EvalMetrics m;
  m.n_pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  m.n_neg = y.size() - m.n_pos;
  if (m.n_pos == 0 || m.n_neg == 0) throw ValidationError("test set needs both classes");
  m.auroc = auroc(y, s);
  return m;
}

// -- analyze ------------------------------------------------------------------

namespace {

std::vector<double> labeled_deltas(const DivergenceCache& cache, const LabelMap& labels) {
  std::vector<std::string> ids;
  for (const auto& id : cache.sample_ids()) {
    if (auto it = labels.find(id); it != labels.end() && it->second) ids.push_back(id);
  }
  if (ids.empty()) throw ValidationError("cache has no labeled samples");
  DivergenceTable t = build_table(cache, ids, labels);
  std::vector<double> out(t.heads.size());
  for (std::size_t h = 0; h < t.heads.size(); ++h) {
    std::vector<double> hallu, grounded;
    for (std::size_t s = 0; s < t.samples.size(); ++s) (*t.labels[s] == 1 ? hallu : grounded).push_back(t.at(s, h));
    out[h] = delta(hallu, grounded);
  }
  return out;
}

}  // namespace

std::vector<HeadDeltaRow> run_analyze(const DivergenceCache& a, const LabelMap& labels_a, const DivergenceCache& b,
                                      const LabelMap& labels_b) {
  const auto grid = a.head_grid();
  if (grid != b.head_grid()) throw ValidationError("caches cover different (layer, head) grids");
  const auto da = labeled_deltas(a, labels_a);
  const auto db = labeled_deltas(b, labels_b);
  std::vector<HeadDeltaRow> rows;
  for (std::size_t h = 0; h < grid.size(); ++h) rows.push_back({grid[h], da[h], db[h]});
  return rows;
}

std::string deltas_to_csv(const std::vector<HeadDeltaRow>& rows) {
  std::string out = "layer,head,delta_A,delta_B\n";
  for (const auto& r : rows) {
    out += std::to_string(r.head.layer) + "," + std::to_string(r.head.head) + "," + format_double(r.delta_a) + "," +
           format_double(r.delta_b) + "\n";
  }
  return out;
}

}  // namespace toha
