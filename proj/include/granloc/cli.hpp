/*
Copyright 2026 The granloc Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

// Command-line front end. Exit codes: 0 success, 1 validation or data error,
// 2 usage error. Option values resolve as: command-line flag, then the
// GRANLOC_<OPTION> environment variable, then the --config JSON file (flat
// keys, or keys nested under the subcommand name), then the built-in default.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "granloc/aggregation.hpp"
#include "granloc/analysis.hpp"
#include "granloc/curation.hpp"
#include "granloc/evaluation.hpp"
#include "granloc/manifest_io.hpp"
#include "granloc/smf.hpp"
#include "granloc/synth.hpp"
#include "granloc/taxonomy.hpp"
#include "granloc/taxonomy_io.hpp"

namespace granloc::cli {

namespace fs = std::filesystem;

/// Raised for missing or inconsistent options; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string env_name(const std::string& option) {
  std::string out = "GRANLOC_";
  for (char c : option) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

inline std::string config_value_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) {
      if (!out.empty()) out += ',';
      out += config_value_string(e);
    }
    return out;
  }
  return v.dump();
}

inline std::optional<std::string> find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

/// Long option name without dashes.
inline std::string long_name(const CLI::Option* opt) {
  const auto& names = opt->get_lnames();
  return names.empty() ? std::string() : names.front();
}

inline void apply_env_and_config(CLI::App& sub, const nlohmann::json* config) {
  for (CLI::Option* opt : sub.get_options()) {
    const std::string name = long_name(opt);
    if (name.empty() || name == "help" || name == "config") continue;
    opt->envname(env_name(name));
    if (!config) continue;
    const nlohmann::json* value = nullptr;
    if (config->contains(name)) value = &(*config)[name];
    if (config->contains(sub.get_name()) && (*config)[sub.get_name()].is_object() &&
        (*config)[sub.get_name()].contains(name))
      value = &(*config)[sub.get_name()][name];
    if (value) opt->default_val(config_value_string(*value));
  }
}

inline void require(const std::string& value, const char* option) {
  if (value.empty()) throw UsageError(std::string("missing required option --") + option);
}

inline fs::path parent_or_dot(const fs::path& p) {
  return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, path.string(), "cannot open for writing");
  out << text;
  if (!out) throw Error(Errc::IoError, path.string(), "write failed");
}

inline std::optional<Split> parse_split_option(const std::string& s) {
  if (s == "all") return std::nullopt;
  try {
    return parse_split(s);
  } catch (const Error&) {
    throw UsageError("unknown split '" + s + "' (train-weaksup, train-fullsup, test, all)");
  }
}

inline Manifest select_split(const Manifest& m, const std::string& split) {
  auto s = parse_split_option(split);
  return s ? filter_split(m, *s) : m;
}

}  // namespace detail

struct Common {
  std::size_t threads = 0;
  std::uint64_t seed = 0;
  std::string config;
};

inline int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"granloc: label-granularity tooling and WSOL evaluation"};
  app.require_subcommand(1);
  Common common;

  std::optional<nlohmann::json> config;
  try {
    if (auto path = detail::find_config_path(args)) {
      std::ifstream in(*path, std::ios::binary);
      if (!in) throw Error(Errc::IoError, *path, "cannot open config");
      config = nlohmann::json::parse(in);
      if (!config->is_object()) throw Error(Errc::ParseError, *path, "config must be a JSON object");
    }
  } catch (const nlohmann::json::exception& e) {
    err << "error: config: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  std::vector<std::function<void()>> actions;
  auto add_common = [&](CLI::App* sub, bool threads, bool seed) {
    sub->add_option("--config", common.config, "JSON config file");
    if (threads) sub->add_option("--threads", common.threads, "worker threads, 0 = auto");
    if (seed) sub->add_option("--seed", common.seed, "random seed");
  };

  // eval ---------------------------------------------------------------------
  struct {
    std::string manifest, hierarchy, split = "test", out, surface, maps_root;
    std::size_t grid = 1000;
    std::vector<double> iou{0.30, 0.50, 0.70};
  } ev;
  auto* eval = app.add_subcommand("eval", "MaxBoxAccV2 over a manifest split");
  eval->add_option("--manifest", ev.manifest, "manifest (JSON Lines)");
  eval->add_option("--hierarchy", ev.hierarchy, "hierarchy (CSV or JSON)");
  eval->add_option("--split", ev.split, "split to evaluate, or 'all'");
  eval->add_option("--out", ev.out, "report JSON path");
  eval->add_option("--surface", ev.surface, "optional BoxAcc surface CSV");
  eval->add_option("--maps-root", ev.maps_root, "directory scoremap paths are relative to");
  eval->add_option("--grid", ev.grid, "number of thresholds");
  eval->add_option("--iou", ev.iou, "IoU thresholds")->delimiter(',');
  add_common(eval, true, false);
  eval->callback([&] {
    actions.push_back([&] {
      detail::require(ev.manifest, "manifest");
      detail::require(ev.hierarchy, "hierarchy");
      detail::require(ev.out, "out");
      const auto h = load_hierarchy(ev.hierarchy);
      const auto split = detail::select_split(load_manifest(ev.manifest, &h), ev.split);
      EvalConfig cfg{ev.iou, ev.grid};
      const fs::path root = ev.maps_root.empty() ? detail::parent_or_dot(ev.manifest) : fs::path(ev.maps_root);
      const auto report = evaluate_run(split, file_scoremap_source(root), cfg, common.threads);
      detail::write_text(ev.out, report_json(report).dump(2) + "\n");
      if (!ev.surface.empty()) {
        std::ostringstream s;
        write_surface_csv(s, report, cfg);
        detail::write_text(ev.surface, s.str());
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.4f", report.max_box_acc_v2);
      out << "MaxBoxAccV2 " << buf << " over " << report.n_samples << " samples\n";
    });
  });

  // coarsen ------------------------------------------------------------------
  struct {
    std::string manifest, hierarchy, out;
    std::size_t k = 0;
  } co;
  auto* coarsen_cmd = app.add_subcommand("coarsen", "relabel every sample k levels closer to the root");
  coarsen_cmd->add_option("--manifest", co.manifest, "input manifest");
  coarsen_cmd->add_option("--hierarchy", co.hierarchy, "hierarchy");
  coarsen_cmd->add_option("--k", co.k, "levels to coarsen (uniform)");
  coarsen_cmd->add_option("--out", co.out, "output manifest");
  add_common(coarsen_cmd, false, false);
  coarsen_cmd->callback([&] {
    actions.push_back([&] {
      detail::require(co.manifest, "manifest");
      detail::require(co.hierarchy, "hierarchy");
      detail::require(co.out, "out");
      const auto h = load_hierarchy(co.hierarchy);
      const auto m = coarsen_dataset(h, load_manifest(co.manifest, &h), co.k);
      save_manifest(m, co.out);
      std::set<std::string> labels;
      for (const auto& r : m.records) labels.insert(r.label);
      out << m.size() << " records, " << labels.size() << " distinct labels\n";
    });
  });

  // stats --------------------------------------------------------------------
  struct {
    std::string manifest, hierarchy, split = "all", out, tier_names;
    std::optional<std::size_t> tier;
  } st;
  auto* stats = app.add_subcommand("stats", "per-tier category statistics");
  stats->add_option("--manifest", st.manifest, "manifest");
  stats->add_option("--hierarchy", st.hierarchy, "consistent hierarchy");
  stats->add_option("--split", st.split, "split, or 'all'");
  stats->add_option("--tier", st.tier, "single tier depth (default: every tier below the root)");
  stats->add_option("--tier-names", st.tier_names, "comma-separated names for depths 0..D");
  stats->add_option("--out", st.out, "CSV output (default stdout)");
  add_common(stats, false, false);
  stats->callback([&] {
    actions.push_back([&] {
      detail::require(st.manifest, "manifest");
      detail::require(st.hierarchy, "hierarchy");
      const auto h = load_hierarchy(st.hierarchy);
      const auto m = detail::select_split(load_manifest(st.manifest, &h), st.split);
      const auto c = is_consistent(h);
      if (!c.consistent) throw Error(Errc::InconsistentHierarchy, st.hierarchy);
      std::vector<std::string> names;
      {
        std::stringstream ss(st.tier_names);
        std::string item;
        while (std::getline(ss, item, ',')) names.push_back(item);
      }
      std::vector<std::size_t> tiers;
      if (st.tier) {
        tiers.push_back(*st.tier);
      } else {
        for (std::size_t d = c.depth; d >= 1; --d) tiers.push_back(d);
      }
      std::ostringstream s;
      s << "granularity,n_categories,min,max,mean,imbalance\n";
      for (std::size_t d : tiers) {
        const auto ts = tier_stats(h, m, d, d < names.size() ? names[d] : std::string());
        char buf[160];
        std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.2f,%.1f\n", ts.n_categories, ts.min_images,
                      ts.max_images, ts.mean_images, ts.imbalance_factor);
        s << csv::quote(ts.granularity_name) << ',' << buf;
      }
      if (st.out.empty())
        out << s.str();
      else
        detail::write_text(st.out, s.str());
    });
  });

  // subsample ----------------------------------------------------------------
  struct {
    std::string manifest, hierarchy, out;
    std::size_t n = 50;
  } ss;
  auto* subsample = app.add_subcommand("subsample", "keep n random samples per category");
  subsample->add_option("--manifest", ss.manifest, "manifest");
  subsample->add_option("--hierarchy", ss.hierarchy, "hierarchy");
  subsample->add_option("--n", ss.n, "samples per category");
  subsample->add_option("--out", ss.out, "output manifest");
  add_common(subsample, false, true);
  subsample->callback([&] {
    actions.push_back([&] {
      detail::require(ss.manifest, "manifest");
      detail::require(ss.hierarchy, "hierarchy");
      detail::require(ss.out, "out");
      const auto h = load_hierarchy(ss.hierarchy);
      const auto res = subsample_per_category(load_manifest(ss.manifest, &h), ss.n, common.seed);
      save_manifest(res.manifest, ss.out);
      out << res.manifest.size() << " records kept";
      if (res.short_categories) out << "; " << res.short_categories << " categories had fewer than " << ss.n;
      out << '\n';
    });
  });

  // analyze ------------------------------------------------------------------
  struct {
    std::string manifest, hierarchy, split = "test", maps_root, out_csv, out_json, cdf_out;
    std::size_t grid = 1000;
  } an;
  auto* analyze = app.add_subcommand("analyze", "per-image localization diagnostics");
  analyze->add_option("--manifest", an.manifest, "manifest");
  analyze->add_option("--hierarchy", an.hierarchy, "hierarchy");
  analyze->add_option("--split", an.split, "split, or 'all'");
  analyze->add_option("--maps-root", an.maps_root, "directory scoremap paths are relative to");
  analyze->add_option("--out-csv", an.out_csv, "per-sample diagnostics CSV");
  analyze->add_option("--out-json", an.out_json, "summary JSON");
  analyze->add_option("--cdf-out", an.cdf_out, "optional box-size CDF CSV");
  analyze->add_option("--grid", an.grid, "number of thresholds");
  add_common(analyze, true, false);
  analyze->callback([&] {
    actions.push_back([&] {
      detail::require(an.manifest, "manifest");
      detail::require(an.hierarchy, "hierarchy");
      if (an.out_csv.empty() && an.out_json.empty() && an.cdf_out.empty())
        throw UsageError("analyze needs at least one of --out-csv, --out-json, --cdf-out");
      const auto h = load_hierarchy(an.hierarchy);
      const auto split = detail::select_split(load_manifest(an.manifest, &h), an.split);
      if (!an.cdf_out.empty()) {
        std::ostringstream s;
        write_cdf_csv(s, box_size_cdf(split));
        detail::write_text(an.cdf_out, s.str());
      }
      if (an.out_csv.empty() && an.out_json.empty()) return;
      const fs::path root = an.maps_root.empty() ? detail::parent_or_dot(an.manifest) : fs::path(an.maps_root);
      const auto source = file_scoremap_source(root);
      std::vector<EvalSample> samples(split.size());
      parallel_for(split.size(), common.threads, [&](std::size_t i, std::size_t) {
        samples[i] = make_eval_sample(split.records[i], source(split.records[i]));
      });
      EvalConfig cfg;
      cfg.n_thresholds = an.grid;
      const auto diag = diagnose_split(samples, cfg, common.threads);
      if (!an.out_csv.empty()) {
        std::ostringstream s;
        write_diagnostics_csv(s, diag);
        detail::write_text(an.out_csv, s.str());
      }
      if (!an.out_json.empty())
        detail::write_text(an.out_json, diagnostics_summary_json(diag.summary).dump(2) + "\n");
      out << "tau* " << diag.summary.tau_star << ", " << diag.summary.n_samples << " samples\n";
    });
  });

  // agg ----------------------------------------------------------------------
  struct {
    std::string hierarchy, cams, leaf, out, manifest, cams_root, out_dir, out_manifest;
    std::size_t tier = 0;
    bool pre_normalize = false;
  } ag;
  auto* agg = app.add_subcommand("agg", "aggregate leaf CAMs under a tier ancestor");
  agg->add_option("--hierarchy", ag.hierarchy, "hierarchy");
  agg->add_option("--tier", ag.tier, "tier depth of the shared ancestor");
  agg->add_option("--cams", ag.cams, "CamSet directory (single image)");
  agg->add_option("--leaf", ag.leaf, "leaf label of the image (single image)");
  agg->add_option("--out", ag.out, "aggregated SMF1 map (single image)");
  agg->add_option("--manifest", ag.manifest, "manifest (batch mode)");
  agg->add_option("--cams-root", ag.cams_root, "directory of per-image CamSets named by image_id (batch)");
  agg->add_option("--out-dir", ag.out_dir, "directory for aggregated maps (batch)");
  agg->add_option("--out-manifest", ag.out_manifest, "manifest pointing at aggregated maps (batch)");
  agg->add_flag("--pre-normalize", ag.pre_normalize, "normalize each map before averaging");
  add_common(agg, true, false);
  agg->callback([&] {
    actions.push_back([&] {
      detail::require(ag.hierarchy, "hierarchy");
      const auto h = load_hierarchy(ag.hierarchy);
      if (ag.manifest.empty()) {
        detail::require(ag.cams, "cams");
        detail::require(ag.leaf, "leaf");
        detail::require(ag.out, "out");
        write_smf(cam_agg_for_sample(h, load_camset(ag.cams), ag.leaf, ag.tier, ag.pre_normalize), ag.out);
        out << "wrote " << ag.out << '\n';
        return;
      }
      detail::require(ag.cams_root, "cams-root");
      detail::require(ag.out_dir, "out-dir");
      detail::require(ag.out_manifest, "out-manifest");
      auto m = load_manifest(ag.manifest, &h);
      fs::create_directories(ag.out_dir);
      const fs::path rel = fs::relative(fs::absolute(ag.out_dir), fs::absolute(detail::parent_or_dot(ag.out_manifest)));
      parallel_for(m.size(), common.threads, [&](std::size_t i, std::size_t) {
        auto& r = m.records[i];
        const auto map = cam_agg_for_sample(h, load_camset(fs::path(ag.cams_root) / r.image_id), r.label,
                                            ag.tier, ag.pre_normalize);
        write_smf(map, fs::path(ag.out_dir) / (r.image_id + ".smf"));
        r.scoremap_path = (rel / (r.image_id + ".smf")).generic_string();
      });
      save_manifest(m, ag.out_manifest);
      out << "aggregated " << m.size() << " images\n";
    });
  });

  // synth --------------------------------------------------------------------
  struct {
    std::string out_dir, blob = "gaussian", split = "test";
    std::vector<std::size_t> widths{2, 4, 8};
    SynthConfig cfg;
  } sy;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with score maps");
  synth->add_option("--out-dir", sy.out_dir, "output directory");
  synth->add_option("--tier-widths", sy.widths, "nodes per tier below the root")->delimiter(',');
  synth->add_option("--per-category", sy.cfg.images_per_category, "images per leaf category");
  synth->add_option("--image-size", sy.cfg.image_size, "square image side");
  synth->add_option("--map-size", sy.cfg.map_size, "square score-map side (0 = image size)");
  synth->add_option("--box-min", sy.cfg.box_min_fraction, "min GT side / image side");
  synth->add_option("--box-max", sy.cfg.box_max_fraction, "max GT side / image side");
  synth->add_option("--blob", sy.blob, "gaussian or box");
  synth->add_option("--area-scale", sy.cfg.area_scale, "blob area / GT area");
  synth->add_option("--center-jitter", sy.cfg.center_jitter, "max center offset, fraction of GT side");
  synth->add_option("--size-jitter", sy.cfg.size_jitter, "relative blob area jitter");
  synth->add_option("--noise", sy.cfg.noise_amplitude, "uniform noise amplitude");
  synth->add_option("--split", sy.split, "split of the generated records");
  add_common(synth, true, true);
  synth->callback([&] {
    actions.push_back([&] {
      detail::require(sy.out_dir, "out-dir");
      if (sy.blob == "gaussian") sy.cfg.blob = BlobShape::Gaussian;
      else if (sy.blob == "box") sy.cfg.blob = BlobShape::Box;
      else throw UsageError("--blob must be gaussian or box");
      auto split = detail::parse_split_option(sy.split);
      if (!split) throw UsageError("--split must name one split");
      sy.cfg.split = *split;
      sy.cfg.tier_widths = sy.widths;
      sy.cfg.seed = common.seed;
      const auto ds = generate_synthetic(sy.cfg, sy.out_dir, common.threads);
      out << "wrote " << ds.manifest.size() << " images to " << sy.out_dir << '\n';
    });
  });

  // center -------------------------------------------------------------------
  struct {
    std::size_t size = 224;
    std::optional<double> sigma;
    std::string out, manifest, hierarchy, out_manifest;
  } ce;
  auto* center = app.add_subcommand("center", "centered Gaussian baseline map");
  center->add_option("--size", ce.size, "map side M");
  center->add_option("--sigma", ce.sigma, "Gaussian sigma (default M/4)");
  center->add_option("--out", ce.out, "output map (.smf, or .pgm for 8-bit PGM)");
  center->add_option("--manifest", ce.manifest, "optional manifest to point at the map");
  center->add_option("--hierarchy", ce.hierarchy, "hierarchy for --manifest");
  center->add_option("--out-manifest", ce.out_manifest, "rewritten manifest");
  add_common(center, false, false);
  center->callback([&] {
    actions.push_back([&] {
      detail::require(ce.out, "out");
      const auto map = center_gaussian(ce.size, ce.sigma);
      if (fs::path(ce.out).extension() == ".pgm") write_pgm8(map, ce.out);
      else write_smf(map, ce.out);
      if (!ce.manifest.empty()) {
        detail::require(ce.hierarchy, "hierarchy");
        detail::require(ce.out_manifest, "out-manifest");
        const auto h = load_hierarchy(ce.hierarchy);
        auto m = load_manifest(ce.manifest, &h);
        const auto rel = fs::relative(fs::absolute(ce.out), fs::absolute(detail::parent_or_dot(ce.out_manifest)));
        for (auto& r : m.records) r.scoremap_path = rel.generic_string();
        save_manifest(m, ce.out_manifest);
      }
      out << "wrote " << ce.out << '\n';
    });
  });

  // resolve-dag --------------------------------------------------------------
  struct {
    std::string in, out, report;
  } rd;
  auto* resolve = app.add_subcommand("resolve-dag", "repair a multi-parent label graph into a tree");
  resolve->add_option("--in", rd.in, "edge list (CSV or JSON)");
  resolve->add_option("--out", rd.out, "tree output (CSV or JSON by extension)");
  resolve->add_option("--report", rd.report, "optional CSV of parent choices");
  add_common(resolve, false, false);
  resolve->callback([&] {
    actions.push_back([&] {
      detail::require(rd.in, "in");
      detail::require(rd.out, "out");
      const auto dag = LabelDag::from_edges(load_edges(rd.in));
      const auto res = resolve_dag_detailed(dag);
      save_hierarchy(res.hierarchy, rd.out);
      if (!rd.report.empty()) {
        std::ostringstream s;
        s << "node,kept_parent,reachable_leaves,deleted_parents\n";
        for (const auto& c : res.choices) {
          std::string deleted;
          for (const auto& d : c.deleted_parents) deleted += (deleted.empty() ? "" : ";") + d;
          csv::write_row(s, {c.node, c.kept_parent, std::to_string(c.reachable_leaves), deleted});
        }
        detail::write_text(rd.report, s.str());
      }
      out << res.hierarchy.leaves().size() << " leaves of " << dag.leaf_names().size() << " kept\n";
    });
  });

  // filter -------------------------------------------------------------------
  struct {
    std::string manifest, hierarchy, out, log;
    FilterConfig cfg;
  } fi;
  auto* filter = app.add_subcommand("filter", "drop records with too-small or too-large boxes");
  filter->add_option("--manifest", fi.manifest, "manifest");
  filter->add_option("--hierarchy", fi.hierarchy, "hierarchy");
  filter->add_option("--out", fi.out, "kept records");
  filter->add_option("--log", fi.log, "optional rejection CSV");
  filter->add_option("--min-size", fi.cfg.min_box_size, "minimum box side in pixels");
  filter->add_option("--max-extent", fi.cfg.max_box_extent, "maximum box side / image side");
  add_common(filter, false, false);
  filter->callback([&] {
    actions.push_back([&] {
      detail::require(fi.manifest, "manifest");
      detail::require(fi.hierarchy, "hierarchy");
      detail::require(fi.out, "out");
      const auto h = load_hierarchy(fi.hierarchy);
      const auto res = filter_boxes(load_manifest(fi.manifest, &h), fi.cfg);
      save_manifest(res.kept, fi.out);
      if (!fi.log.empty()) {
        std::ostringstream s;
        write_rejections_csv(s, res.rejected);
        detail::write_text(fi.log, s.str());
      }
      out << res.kept.size() << " kept, " << res.rejected.size() << " rejected\n";
    });
  });

  // split --------------------------------------------------------------------
  struct {
    std::string manifest, hierarchy, out_prefix;
    std::vector<double> fractions{0.5, 0.5};
    std::vector<std::string> names{"train-fullsup", "test"};
  } sp;
  auto* split_cmd = app.add_subcommand("split", "observation-grouped split");
  split_cmd->add_option("--manifest", sp.manifest, "manifest");
  split_cmd->add_option("--hierarchy", sp.hierarchy, "hierarchy");
  split_cmd->add_option("--fractions", sp.fractions, "split fractions")->delimiter(',');
  split_cmd->add_option("--names", sp.names, "split names")->delimiter(',');
  split_cmd->add_option("--out-prefix", sp.out_prefix, "writes <prefix>.<name>.jsonl");
  add_common(split_cmd, false, true);
  split_cmd->callback([&] {
    actions.push_back([&] {
      detail::require(sp.manifest, "manifest");
      detail::require(sp.hierarchy, "hierarchy");
      detail::require(sp.out_prefix, "out-prefix");
      if (sp.names.size() != sp.fractions.size())
        throw UsageError("--names and --fractions must have the same length");
      std::vector<Split> splits;
      for (const auto& n : sp.names) {
        auto s = detail::parse_split_option(n);
        if (!s) throw UsageError("--names must list concrete splits");
        splits.push_back(*s);
      }
      const auto h = load_hierarchy(sp.hierarchy);
      auto parts = split_by_observation(load_manifest(sp.manifest, &h), sp.fractions, common.seed);
      for (std::size_t k = 0; k < parts.size(); ++k) {
        for (auto& r : parts[k].records) {
          r.split = splits[k];
          if (r.split != Split::TrainWeaksup && r.boxes.empty())
            throw Error(Errc::InvalidBox, r.image_id, "boxed split needs boxes");
        }
        save_manifest(parts[k], sp.out_prefix + "." + sp.names[k] + ".jsonl");
        out << sp.names[k] << ": " << parts[k].size() << " records\n";
      }
    });
  });

  // --seed and --threads share storage across subcommands, so config defaults
  // go only to the one being invoked.
  const auto invoked = std::find_if(args.begin(), args.end(), [&](const std::string& a) {
    return !a.starts_with("-") && app.get_subcommand_no_throw(a) != nullptr;
  });
  for (CLI::App* sub : app.get_subcommands({})) {
    const bool selected = invoked != args.end() && sub->get_name() == *invoked;
    detail::apply_env_and_config(*sub, config && selected ? &*config : nullptr);
  }

  std::vector<const char*> argv{"granloc"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    for (auto& action : actions) action();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

inline int cli_dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace granloc::cli
