// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

// toha: attention-graph hallucination scoring.
//
//   toha synth      --spec SPEC.json --out DIR
//   toha divergence --manifest M --out CACHE [--threads K] [--variant mtop|mst]
//   toha select     --cache C --probe IDS --labels M [--n-max 10] --out SEL.json
//   toha score      --cache C --selection SEL.json --test IDS --out SCORES.csv
//   toha eval       --scores SCORES.csv --labels M --out METRICS.json
//   toha analyze    --cache-a A --cache-b B --labels-a MA --labels-b MB --out DELTAS.csv
//
// Exit codes: 0 success, 1 validation error, 2 partial failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "toha/error.hpp"
#include "toha/io_util.hpp"
#include "toha/pipeline.hpp"
#include "toha/synth.hpp"

namespace fs = std::filesystem;
using namespace toha;

namespace {

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out += suffix;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topological hallucination scoring over attention graphs"};
  app.require_subcommand(1);

  // divergence
  std::string manifest_path, cache_out, threads_spec = "auto", variant = "mtop";
  bool serial = false;
  auto* div = app.add_subcommand("divergence", "Compute per-head divergences for every sample in a manifest");
  div->add_option("--manifest", manifest_path, "Dataset manifest (JSON)")->required();
  div->add_option("--out", cache_out, "Output divergence cache (CSV)")->required();
  div->add_option("--threads", threads_spec, "Worker threads or 'auto' (TOHA_THREADS overrides)");
  div->add_option("--variant", variant, "mtop (default) or mst");
  div->add_flag("--serial", serial, "Use the serial reference kernel");

  // select
  std::string sel_cache, probe_spec, sel_labels, sel_out, split_spec;
  std::size_t n_max = kDefaultMaxHeads, probe_size = 100;
  std::uint64_t seed = 0;
  auto* sel = app.add_subcommand("select", "Rank heads on a labeled probe set and pick N_opt");
  sel->add_option("--cache", sel_cache, "Divergence cache")->required();
  auto* probe_opt = sel->add_option("--probe", probe_spec, "Probe ids: file (one per line) or comma list");
  auto* split_opt = sel->add_option("--split", split_spec,
                                    "SEED:FRACTION - draw a probe/test split, write it next to --out, then select");
  probe_opt->excludes(split_opt);
  sel->add_option("--probe-size", probe_size, "Probe size used with --split");
  sel->add_option("--labels", sel_labels, "Manifest holding the labels")->required();
  sel->add_option("--n-max", n_max, "Maximum number of heads to average");
  sel->add_option("--seed", seed, "Seed recorded in the report (overridden by --split)");
  sel->add_option("--threads", threads_spec, "Worker threads or 'auto'");
  sel->add_option("--out", sel_out, "Selection report (JSON)")->required();

  // score
  std::string score_cache, selection_path, test_spec, scores_out;
  auto* score = app.add_subcommand("score", "Score test samples with the selected heads");
  score->add_option("--cache", score_cache, "Divergence cache")->required();
  score->add_option("--selection", selection_path, "Selection report")->required();
  score->add_option("--test", test_spec, "Test ids: file (one per line) or comma list")->required();
  score->add_option("--out", scores_out, "Scores (CSV)")->required();

  // eval
  std::string scores_path, eval_labels, metrics_out;
  auto* eval = app.add_subcommand("eval", "AUROC of scores against manifest labels");
  eval->add_option("--scores", scores_path, "Scores CSV")->required();
  eval->add_option("--labels", eval_labels, "Manifest holding the labels")->required();
  eval->add_option("--out", metrics_out, "Metrics (JSON)")->required();

  // analyze
  std::string cache_a, cache_b, labels_a, labels_b, deltas_out;
  auto* analyze = app.add_subcommand("analyze", "Per-head deltas across two labeled caches");
  analyze->add_option("--cache-a", cache_a)->required();
  analyze->add_option("--cache-b", cache_b)->required();
  analyze->add_option("--labels-a", labels_a)->required();
  analyze->add_option("--labels-b", labels_b)->required();
  analyze->add_option("--out", deltas_out, "Delta table (CSV)")->required();

  // synth
  std::string spec_path, synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with planted heads");
  synth->add_option("--spec", spec_path, "Synthetic spec (JSON)")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--threads", threads_spec, "Worker threads or 'auto'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*div) {
      DivergenceOptions opts;
      opts.variant = parse_variant(variant);
      opts.threads = resolve_threads(threads_spec);
      opts.serial_reference = serial;
      int code = cmd_divergence(manifest_path, cache_out, opts);
      if (code == kExitPartial) {
        std::cerr << "some samples failed; see " << cache_out << ".errors\n";
      }
      return code;
    }

    if (*sel) {
      DivergenceCache cache = read_cache(sel_cache);
      LabelMap labels = labels_from_manifest(read_manifest(sel_labels));
      std::vector<std::string> probe_ids;
      if (!split_spec.empty()) {
        auto parts = split(split_spec, ':');
        if (parts.size() != 2) throw ValidationError("--split expects SEED:FRACTION");
        seed = parse_u64(parts[0]);
        ProbeTestSplit s = make_split(cache, labels, seed, parse_double(parts[1]), probe_size);
        write_id_list(with_suffix(sel_out, ".probe.ids"), s.probe);
        write_id_list(with_suffix(sel_out, ".test.ids"), s.test);
        probe_ids = s.probe;
      } else if (!probe_spec.empty()) {
        probe_ids = read_id_list(probe_spec);
      } else {
        throw ValidationError("select needs --probe or --split");
      }
      SelectionReport report = run_select(cache, labels, probe_ids, n_max, seed, resolve_threads(threads_spec));
      for (const auto& w : report.result.warnings) std::cerr << "warning: " << w << "\n";
      write_file_atomic(sel_out, report.to_json());
      return kExitOk;
    }

    if (*score) {
      DivergenceCache cache = read_cache(score_cache);
      SelectionReport report = SelectionReport::from_json(read_file(selection_path));
      ScoreList scores = run_score(cache, report, read_id_list(test_spec));
      write_file_atomic(scores_out, scores_to_csv(scores));
      return kExitOk;
    }

    if (*eval) {
      ScoreList scores = scores_from_csv(read_file(scores_path));
      EvalMetrics m = run_eval(scores, labels_from_manifest(read_manifest(eval_labels)));
      write_file_atomic(metrics_out, m.to_json());
      return kExitOk;
    }

    if (*analyze) {
      auto rows = run_analyze(read_cache(cache_a), labels_from_manifest(read_manifest(labels_a)), read_cache(cache_b),
                              labels_from_manifest(read_manifest(labels_b)));
      write_file_atomic(deltas_out, deltas_to_csv(rows));
      return kExitOk;
    }

    if (*synth) {
      SyntheticSpec spec = synthetic_spec_from_json(read_file(spec_path));
      write_synthetic_dataset(spec, synth_out, resolve_threads(threads_spec));
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
