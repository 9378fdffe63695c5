#include "macekit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "macekit/deteval.hpp"
#include "macekit/error.hpp"
#include "macekit/ingest.hpp"
#include "macekit/mace.hpp"
#include "macekit/modality.hpp"
#include "macekit/project.hpp"
#include "macekit/report.hpp"
#include "macekit/stats.hpp"
#include "macekit/synth.hpp"

#ifndef MACEKIT_VERSION
#define MACEKIT_VERSION "0.0.0"
#endif

namespace macekit::cli {

namespace fs = std::filesystem;

void validate(const RunConfig& cfg) {
  if (cfg.resamples < 2) fail(Errc::InvalidArgument, "--resamples must be >= 2");
  if (!(cfg.margin > 0.0) || !std::isfinite(cfg.margin)) fail(Errc::InvalidArgument, "--margin must be > 0");
  if (cfg.fapm_points.empty()) fail(Errc::InvalidArgument, "--fapm needs at least one operating point");
  for (double f : cfg.fapm_points) {
    if (!(f >= 0.0) || !std::isfinite(f)) fail(Errc::InvalidArgument, "--fapm points must be finite and >= 0");
  }
  if (cfg.window < 1 || cfg.window % 2 == 0) fail(Errc::InvalidArgument, "--window must be a positive odd number");
  if (!(cfg.iou > 0.0 && cfg.iou <= 1.0)) fail(Errc::InvalidArgument, "--iou must lie in (0, 1]");
  if (cfg.threads < 1) fail(Errc::InvalidArgument, "--threads must be >= 1");
}

namespace {

struct Input {
  std::string role;
  std::string file;
  std::string sha256;
};

struct Assignment {
  std::string name;
  std::string path;
};

Assignment split_assignment(const std::string& text, const char* flag) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    fail(Errc::InvalidArgument, std::string(flag) + " expects name=path, got \"" + text + "\"");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

BootstrapConfig bootstrap_config(const RunConfig& cfg, ResampleUnit unit = ResampleUnit::Video) {
  BootstrapConfig b;
  b.n_resamples = cfg.resamples;
  b.seed = cfg.seed;
  b.unit = unit;
  b.threads = cfg.threads;
  return b;
}

ordered_json config_json(const RunConfig& cfg) {
  ordered_json o;
  o["seed"] = cfg.seed;
  o["resamples"] = cfg.resamples;
  o["margin"] = cfg.margin;
  o["fapm_points"] = cfg.fapm_points;
  o["window"] = cfg.window;
  o["iou"] = cfg.iou;
  o["ce_rule"] = cfg.ce_rule.empty() ? std::string("builtin") : fs::path(cfg.ce_rule).filename().string();
  o["strict"] = cfg.strict;
  o["svg"] = cfg.svg;
  return o;
}

void add_file_input(std::vector<Input>& inputs, const std::string& role, const fs::path& path) {
  inputs.push_back({role, path.filename().string(), file_sha256(path)});
}

void add_embedding_inputs(std::vector<Input>& inputs, const std::string& role, const fs::path& path) {
  add_file_input(inputs, role, path);
  const auto sidecar = keys_sidecar_path(path);
  if (fs::exists(sidecar)) add_file_input(inputs, role, sidecar);
}

void add_bundle_inputs(std::vector<Input>& inputs, const std::string& role, const fs::path& dir) {
  for (const char* name : {kVideosFile, kFramesFile, kDetectionsFile, kAnnotationsFile}) {
    if (fs::exists(dir / name)) add_file_input(inputs, role, dir / name);
  }
}

// One digest over every file of a tree, keyed by relative path.
void add_tree_input(std::vector<Input>& inputs, const std::string& role, const fs::path& root) {
  if (!fs::is_directory(root)) fail(Errc::Io, "not a directory: " + root.string());
  std::vector<std::pair<std::string, fs::path>> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) files.emplace_back(fs::relative(entry.path(), root).generic_string(), entry.path());
  }
  std::sort(files.begin(), files.end());
  std::string manifest;
  for (const auto& [rel, path] : files) manifest += rel + " " + file_sha256(path) + "\n";
  const auto* bytes = reinterpret_cast<const std::byte*>(manifest.data());
  inputs.push_back({role, std::to_string(files.size()) + " files", sha256_hex({bytes, manifest.size()})});
}

ordered_json report_header(const std::string& command, const RunConfig& cfg, const ordered_json& options,
                           const std::vector<Input>& inputs) {
  ordered_json o;
  o["tool"] = "macekit";
  o["version"] = MACEKIT_VERSION;
  o["command"] = command;
  o["config"] = config_json(cfg);
  o["options"] = options;
  ordered_json arr = ordered_json::array();
  for (const auto& in : inputs) arr.push_back({{"role", in.role}, {"file", in.file}, {"sha256", in.sha256}});
  o["inputs"] = arr;
  return o;
}

void write_json(const fs::path& path, const ordered_json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string curve_csv(const Curve& curve) {
  std::string s = "fapm,tpr\n";
  for (const auto& p : curve) s += format_number(p.fapm) + "," + format_number(p.tpr) + "\n";
  return s;
}

PixelRangeRule pixel_rule(const RunConfig& cfg) {
  return cfg.ce_rule.empty() ? default_ce_rule() : load_pixel_rule(cfg.ce_rule);
}

std::vector<FilterConfig> sweep_for(const RunConfig& cfg, int thresholds) {
  if (thresholds < 1) fail(Errc::InvalidArgument, "--thresholds must be >= 1");
  std::vector<FilterConfig> sweep;
  for (int votes = 1; votes <= cfg.window; ++votes) {
    for (int k = 1; k <= thresholds; ++k) {
      sweep.push_back({cfg.window, votes, static_cast<double>(k) / thresholds});
    }
  }
  return sweep;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

// ---- validate -------------------------------------------------------------

struct ValidateArgs {
  std::string data;
  std::vector<std::string> embeddings;
};

int cmd_validate(const RunConfig& cfg, const ValidateArgs& a, std::ostream& out) {
  const ParseOptions opts{cfg.strict};
  auto parts = read_bundle_parts(a.data, opts);
  for (const auto& e : a.embeddings) {
    const auto [name, path] = split_assignment(e, "--embeddings");
    parts.embeddings[name] = load_embedding_set(path, opts);
  }
  const auto bundle = validate_bundle(std::move(parts));
  out << "ok: " << bundle.videos.size() << " videos, " << bundle.frames.size() << " frame records, "
      << bundle.detections.size() << " frames with detections, " << bundle.tracks.size() << " polyps, "
      << bundle.embeddings.size() << " embedding sets\n";
  return 0;
}

// ---- mace -----------------------------------------------------------------

struct MaceArgs {
  std::string a, b, label, embedding_name = "embedding", unit = "video";
};

ResampleUnit parse_unit(const std::string& unit) {
  if (unit == "video") return ResampleUnit::Video;
  if (unit == "frame") return ResampleUnit::Frame;
  fail(Errc::InvalidArgument, "--unit must be video or frame, got \"" + unit + "\"");
}

ordered_json mace_entry(const MaceBootstrap& mb) {
  const auto [lo, hi] = percentile_ci(mb.samples, 0.95);
  ordered_json o;
  o["estimate"] = mb.score.value;
  o["ci"] = {lo, hi};
  o["bootstrap_mean"] = sample_mean(mb.samples);
  o["valid_resamples"] = mb.samples.size();
  o["d"] = mb.score.d;
  o["n_a"] = mb.score.n_a;
  o["n_b"] = mb.score.n_b;
  o["undersampled"] = mb.score.undersampled;
  return o;
}

int cmd_mace(const RunConfig& cfg, const MaceArgs& a, std::ostream& out) {
  const ParseOptions opts{cfg.strict};
  const auto unit = parse_unit(a.unit);
  const auto set_a = load_embedding_set(a.a, opts);
  const auto set_b = load_embedding_set(a.b, opts);
  std::vector<Input> inputs;
  add_embedding_inputs(inputs, "a", a.a);
  add_embedding_inputs(inputs, "b", a.b);

  const auto bcfg = bootstrap_config(cfg, unit);
  const auto mb = bootstrap_mace(set_a, set_b, bcfg);
  const std::string label = a.label.empty() ? stem_of(a.a) + " vs " + stem_of(a.b) : a.label;

  ordered_json options{{"label", label}, {"embedding", a.embedding_name}, {"unit", a.unit}};
  auto doc = report_header("mace", cfg, options, inputs);
  auto entry = mace_entry(mb);
  const auto ci = entry["ci"];
  ordered_json result{{"comparison", label}, {"embedding", a.embedding_name}};
  result.update(entry);
  result["n_resamples"] = cfg.resamples;
  result["seed"] = cfg.seed;
  doc["result"] = result;

  const fs::path dir = cfg.out;
  write_json(dir / "mace.json", doc);
  std::string csv = "comparison,embedding,estimate,ci_lo,ci_hi,n_resamples,seed\n";
  csv += csv_field(label) + "," + csv_field(a.embedding_name) + "," + format_number(mb.score.value) + "," +
         format_number(ci[0].get<double>()) + "," + format_number(ci[1].get<double>()) + "," +
         std::to_string(cfg.resamples) + "," + std::to_string(cfg.seed) + "\n";
  write_text(dir / "mace.csv", csv);
  out << label << " [" << a.embedding_name << "]: " << format_number(mb.score.value) << " (95% CI "
      << format_number(ci[0].get<double>()) << ", " << format_number(ci[1].get<double>()) << ")\n";
  return 0;
}

// ---- mace-test ------------------------------------------------------------

struct MaceTestArgs {
  std::string ref;
  std::vector<std::string> groups;
  std::string embedding_name = "embedding";
  std::string unit = "video";
  double alpha = 0.05;
};

int cmd_mace_test(const RunConfig& cfg, const MaceTestArgs& a, std::ostream& out) {
  if (a.groups.size() < 2) fail(Errc::InvalidArgument, "mace-test needs at least two --group entries");
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) fail(Errc::InvalidArgument, "--alpha must lie in (0, 1)");
  const ParseOptions opts{cfg.strict};
  const auto unit = parse_unit(a.unit);
  const auto ref = load_embedding_set(a.ref, opts);
  std::vector<Input> inputs;
  add_embedding_inputs(inputs, "ref", a.ref);

  std::vector<std::string> names;
  std::vector<MaceBootstrap> boots;
  const auto bcfg = bootstrap_config(cfg, unit);
  for (std::size_t i = 0; i < a.groups.size(); ++i) {
    const auto [name, path] = split_assignment(a.groups[i], "--group");
    if (std::find(names.begin(), names.end(), name) != names.end()) {
      fail(Errc::InvalidArgument, "duplicate group name \"" + name + "\"");
    }
    add_embedding_inputs(inputs, name, path);
    const auto set = load_embedding_set(path, opts);
    names.push_back(name);
    boots.push_back(bootstrap_mace(ref, set, bcfg, 0, 1 + i));
  }

  ordered_json options{{"embedding", a.embedding_name}, {"unit", a.unit}, {"alpha", a.alpha}};
  auto doc = report_header("mace-test", cfg, options, inputs);
  ordered_json groups = ordered_json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    ordered_json g{{"group", names[i]}};
    g.update(mace_entry(boots[i]));
    groups.push_back(g);
  }

  std::map<std::pair<std::size_t, std::size_t>, TestResult> tests;
  ordered_json pairs = ordered_json::array();
  std::string csv = "group_a,group_b,mace_a,mace_b,statistic,p_value,decision\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = i + 1; j < names.size(); ++j) {
      const auto r = z_test_two_sided(boots[i].samples, boots[j].samples, a.alpha);
      tests[{i, j}] = r;
      ordered_json p{{"group_a", names[i]}, {"group_b", names[j]}};
      p.update(to_json(r));
      pairs.push_back(p);
      csv += csv_field(names[i]) + "," + csv_field(names[j]) + "," + format_number(boots[i].score.value) + "," +
             format_number(boots[j].score.value) + "," + format_number(r.statistic) + "," +
             (r.p_floored ? std::string("<1e-8") : format_number(r.p_value)) + "," +
             std::string(to_string(r.decision)) + "\n";
    }
  }

  std::vector<std::size_t> order(names.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return boots[x].score.value > boots[y].score.value; });
  std::string summary = names[order[0]];
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto key = std::minmax(order[k - 1], order[k]);
    summary += tests.at(key).decision == Decision::Reject ? " > " : " ~ ";
    summary += names[order[k]];
  }

  doc["result"] = {{"reference", stem_of(a.ref)}, {"groups", groups}, {"tests", pairs}, {"ordering", summary}};
  const fs::path dir = cfg.out;
  write_json(dir / "mace_test.json", doc);
  write_text(dir / "mace_test.csv", csv);
  out << "ordering: " << summary << "\n";
  return 0;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string data, data_b, label_a = "A", label_b = "B";
  int thresholds = 50;
};

ordered_json operating_points(const Curve& curve, const TprBootstrap& tb) {
  ordered_json arr = ordered_json::array();
  for (std::size_t p = 0; p < tb.fapm_points.size(); ++p) {
    const auto it = tpr_at_fapm(curve, tb.fapm_points[p]);
    const auto [lo, hi] = percentile_ci(tb.samples[p], 0.95);
    arr.push_back({{"fapm", tb.fapm_points[p]}, {"tpr", it.tpr}, {"clamped", it.clamped}, {"ci", {lo, hi}}});
  }
  return arr;
}

ordered_json table_summary(const EvalTable& table) {
  const auto all = table.all_videos();
  std::int64_t polyps = 0;
  double minutes = 0.0;
  if (table.n_configs() > 0) {
    const auto t = table.totals(all, 0);
    polyps = t.polyps;
    minutes = t.minutes;
  }
  return {{"videos", table.n_videos()}, {"polyps", polyps}, {"minutes", minutes}, {"configs", table.n_configs()}};
}

int cmd_eval(const RunConfig& cfg, const EvalArgs& a, std::ostream& out) {
  const ParseOptions opts{cfg.strict};
  const auto sweep = sweep_for(cfg, a.thresholds);
  const MatchConfig m{cfg.iou};
  const auto bcfg = bootstrap_config(cfg);
  const fs::path dir = cfg.out;

  std::vector<Input> inputs;
  const auto bundle_a = load_bundle(a.data, opts);
  add_bundle_inputs(inputs, a.label_a, a.data);
  std::optional<DatasetBundle> bundle_b;
  if (!a.data_b.empty()) {
    bundle_b = load_bundle(a.data_b, opts);
    add_bundle_inputs(inputs, a.label_b, a.data_b);
  }

  const auto table_a = EvalTable::build(bundle_a, sweep, m, {}, false, cfg.threads);
  const auto curve_a = table_a.curve();
  if (!curve_a) fail(Errc::NotEstimable, a.label_a + ": bundle has no polyps");
  const auto tb_a = bootstrap_tpr(table_a, cfg.fapm_points, bcfg);

  ordered_json options{{"label_a", a.label_a}, {"thresholds", a.thresholds}};
  if (bundle_b) options["label_b"] = a.label_b;
  auto doc = report_header("eval", cfg, options, inputs);
  ordered_json result;
  result[a.label_a] = {{"summary", table_summary(table_a)},
                       {"curve_points", curve_a->size()},
                       {"operating_points", operating_points(*curve_a, tb_a)}};
  write_text(dir / "curve.csv", curve_csv(*curve_a));
  std::vector<SvgSeries> series;
  auto to_series = [](const std::string& label, const Curve& c) {
    SvgSeries s{label, {}, true};
    for (const auto& p : c) s.points.emplace_back(p.fapm, p.tpr);
    return s;
  };
  series.push_back(to_series(a.label_a, *curve_a));

  out << a.label_a << ":";
  for (std::size_t p = 0; p < cfg.fapm_points.size(); ++p) {
    out << " tpr@" << format_number(cfg.fapm_points[p]) << "=" << format_number(tpr_at_fapm(*curve_a, cfg.fapm_points[p]).tpr);
  }
  out << "\n";

  if (bundle_b) {
    const auto table_b = EvalTable::build(*bundle_b, sweep, m, {}, false, cfg.threads);
    const auto curve_b = table_b.curve();
    if (!curve_b) fail(Errc::NotEstimable, a.label_b + ": bundle has no polyps");
    const auto tb_b = bootstrap_tpr(table_b, cfg.fapm_points, bcfg);
    result[a.label_b] = {{"summary", table_summary(table_b)},
                         {"curve_points", curve_b->size()},
                         {"operating_points", operating_points(*curve_b, tb_b)}};
    write_text(dir / "curve_b.csv", curve_csv(*curve_b));
    series.push_back(to_series(a.label_b, *curve_b));

    const auto deltas = bootstrap_deltas(table_a, table_b, cfg.fapm_points, bcfg, false);
    ordered_json comparisons = ordered_json::array();
    std::string csv = "fapm,tpr_a,tpr_b,test,statistic,p_value,ci_lo,ci_hi,decision\n";
    for (std::size_t p = 0; p < cfg.fapm_points.size(); ++p) {
      const auto sup = superiority_one_sided(deltas.deltas[p]);
      const auto ni = non_inferiority(deltas.deltas[p], cfg.margin);
      comparisons.push_back({{"fapm", cfg.fapm_points[p]},
                             {"tpr_a", deltas.tpr_a[p]},
                             {"tpr_b", deltas.tpr_b[p]},
                             {"superiority", to_json(sup)},
                             {"non_inferiority", to_json(ni)}});
      for (const auto& [name, r] : {std::pair<const char*, const TestResult&>{"superiority", sup},
                                    std::pair<const char*, const TestResult&>{"non_inferiority", ni}}) {
        csv += format_number(cfg.fapm_points[p]) + "," + format_number(deltas.tpr_a[p]) + "," +
               format_number(deltas.tpr_b[p]) + "," + name + "," + format_number(r.statistic) + "," +
               (r.p_floored ? std::string("<1e-8") : format_number(r.p_value)) + "," + format_number(r.ci_lo) + "," +
               format_number(r.ci_hi) + "," + std::string(to_string(r.decision)) + "\n";
      }
      out << a.label_b << " vs " << a.label_a << " @" << format_number(cfg.fapm_points[p])
          << ": superiority " << to_string(sup.decision) << ", non-inferiority " << to_string(ni.decision) << "\n";
    }
    result["comparison"] = {{"delta", a.label_b + " - " + a.label_a}, {"tests", comparisons}};
    write_text(dir / "compare.csv", csv);
  }

  doc["result"] = result;
  write_json(dir / "eval.json", doc);
  if (cfg.svg) {
    write_text(dir / "curve.svg", render_svg("TPR vs false alarms per minute", "FAPM", "TPR", series));
  }
  return 0;
}

// ---- cohort ---------------------------------------------------------------

struct CohortArgs {
  std::string data, modality, frames_root;
  double step = 0.1;
  std::size_t min_cohort = 100;
  int bins = 10;
  int thresholds = 50;
};

int cmd_cohort(const RunConfig& cfg, const CohortArgs& a, std::ostream& out) {
  const ParseOptions opts{cfg.strict};
  const auto which = parse_modality(a.modality);
  if (!(a.step > 0.0 && a.step <= 1.0)) fail(Errc::InvalidArgument, "--step must lie in (0, 1]");
  if (a.bins < 1) fail(Errc::InvalidArgument, "--bins must be >= 1");
  const auto rule = pixel_rule(cfg);
  const auto sweep = sweep_for(cfg, a.thresholds);
  const MatchConfig m{cfg.iou};
  const auto bcfg = bootstrap_config(cfg);
  const std::string mod(to_string(which));

  std::vector<Input> inputs;
  const auto bundle = load_bundle(a.data, opts);
  add_bundle_inputs(inputs, "data", a.data);
  if (!cfg.ce_rule.empty()) add_file_input(inputs, "ce_rule", cfg.ce_rule);
  std::optional<fs::path> frames_root;
  if (!a.frames_root.empty()) {
    frames_root = a.frames_root;
    add_tree_input(inputs, "frames", a.frames_root);
  }

  const ModalityFlags flags(bundle, frames_root, rule);
  const auto fractions = lesion_fractions(bundle, flags, which);
  const auto steps = fraction_sweep(fractions, a.step, a.min_cohort);

  std::vector<std::string> csv_rows;
  ordered_json step_json = ordered_json::array();
  std::size_t n_tests = 0;
  if (!steps.empty()) {
    const auto reference = EvalTable::build(bundle, sweep, m, {}, false, cfg.threads);
    for (const auto& st : steps) {
      const std::set<std::string> members(st.polyp_ids.begin(), st.polyp_ids.end());
      const PolypFilter eligible = [&members](const PolypTrack& t) { return members.contains(t.polyp_id); };
      const auto table = EvalTable::build(bundle, sweep, m, eligible, true, cfg.threads);
      const auto curve = table.curve();
      if (!curve) fail(Errc::NotEstimable, "cohort at " + format_number(st.threshold) + " has no polyps");
      const auto tb = bootstrap_tpr(table, cfg.fapm_points, bcfg);
      const auto deltas = bootstrap_deltas(reference, table, cfg.fapm_points, bcfg, true);
      std::size_t videos = 0;
      for (std::size_t v = 0; v < table.n_videos(); ++v) videos += table.included(v) ? 1 : 0;

      ordered_json points = ordered_json::array();
      for (std::size_t p = 0; p < cfg.fapm_points.size(); ++p) {
        const auto it = tpr_at_fapm(*curve, cfg.fapm_points[p]);
        const auto [lo, hi] = percentile_ci(tb.samples[p], 0.95);
        const auto ni = non_inferiority(deltas.deltas[p], cfg.margin);
        ++n_tests;
        points.push_back({{"fapm", cfg.fapm_points[p]},
                          {"tpr", it.tpr},
                          {"clamped", it.clamped},
                          {"ci", {lo, hi}},
                          {"reference_tpr", deltas.tpr_a[p]},
                          {"non_inferiority", to_json(ni)}});
        csv_rows.push_back(format_number(st.threshold) + "," + std::to_string(st.polyp_ids.size()) + "," +
                           std::to_string(videos) + "," + format_number(cfg.fapm_points[p]) + "," +
                           format_number(it.tpr) + "," + format_number(lo) + "," + format_number(hi) + "," +
                           format_number(deltas.tpr_a[p]) + "," + format_number(ni.statistic) + "," +
                           (ni.p_floored ? std::string("<1e-8") : format_number(ni.p_value)) + "," +
                           std::string(to_string(ni.decision)));
      }
      step_json.push_back({{"threshold", st.threshold},
                           {"polyps", st.polyp_ids.size()},
                           {"videos", videos},
                           {"operating_points", points}});
    }
  }

  std::vector<double> edges;
  for (int k = 0; k <= a.bins; ++k) edges.push_back(static_cast<double>(k) / a.bins);
  const auto vf = video_fractions(bundle, flags, which);
  const auto hist = histogram_of(vf, edges);
  std::string hist_csv = "bin_lo,bin_hi,videos,with_polyp,without_polyp,videos_at_least_lo\n";
  ordered_json hist_json = ordered_json::array();
  for (std::size_t k = 0; k + 1 < hist.edges.size(); ++k) {
    const auto at_least = count_at_least(vf, hist.edges[k]);
    hist_csv += format_number(hist.edges[k]) + "," + format_number(hist.edges[k + 1]) + "," +
                std::to_string(hist.total[k]) + "," + std::to_string(hist.with_polyp[k]) + "," +
                std::to_string(hist.without_polyp[k]) + "," + std::to_string(at_least) + "\n";
    hist_json.push_back({{"lo", hist.edges[k]},
                         {"hi", hist.edges[k + 1]},
                         {"videos", hist.total[k]},
                         {"with_polyp", hist.with_polyp[k]},
                         {"without_polyp", hist.without_polyp[k]},
                         {"videos_at_least_lo", at_least}});
  }

  ordered_json options{{"modality", mod},
                       {"step", a.step},
                       {"min_cohort", a.min_cohort},
                       {"bins", a.bins},
                       {"thresholds", a.thresholds}};
  auto doc = report_header("cohort", cfg, options, inputs);
  doc["result"] = {{"polyps", fractions.size()},
                   {"frames_classified_from_pixels", flags.classified_from_pixels()},
                   {"frames_unresolved", flags.unresolved()},
                   {"reference", "all polyps"},
                   {"tests", n_tests},
                   {"sweep", step_json},
                   {"histogram", hist_json}};

  const fs::path dir = cfg.out;
  write_json(dir / ("cohort_" + mod + ".json"), doc);
  std::string csv = "threshold,polyps,videos,fapm,tpr,ci_lo,ci_hi,reference_tpr,statistic,p_value,decision\n";
  for (const auto& r : csv_rows) csv += r + "\n";
  write_text(dir / ("cohort_" + mod + ".csv"), csv);
  write_text(dir / ("histogram_" + mod + ".csv"), hist_csv);
  out << mod << ": " << steps.size() << " thresholds with >= " << a.min_cohort << " polyps, " << n_tests
      << " non-inferiority tests\n";
  return 0;
}

// ---- project --------------------------------------------------------------

struct ProjectArgs {
  std::vector<std::string> sets;
  std::string method = "pca";
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
};

int cmd_project(const RunConfig& cfg, const ProjectArgs& a, std::ostream& out) {
  if (a.sets.empty()) fail(Errc::InvalidArgument, "project needs at least one --set");
  if (a.method != "pca" && a.method != "tsne") fail(Errc::InvalidArgument, "--method must be pca or tsne");
  const ParseOptions opts{cfg.strict};
  std::vector<Input> inputs;
  std::vector<std::pair<std::string, EmbeddingSet>> sets;
  Eigen::Index rows = 0;
  for (const auto& s : a.sets) {
    Assignment as = s.find('=') == std::string::npos ? Assignment{stem_of(s), s} : split_assignment(s, "--set");
    add_embedding_inputs(inputs, as.name, as.path);
    sets.emplace_back(as.name, load_embedding_set(as.path, opts));
    if (sets.back().second.d() != sets.front().second.d()) {
      fail(Errc::DimensionMismatch, as.name + " has d=" + std::to_string(sets.back().second.d()) + ", expected " +
                                        std::to_string(sets.front().second.d()));
    }
    rows += sets.back().second.n();
  }
  Matrix x(rows, sets.front().second.d());
  std::vector<std::string> labels;
  Eigen::Index r = 0;
  for (const auto& [name, set] : sets) {
    x.middleRows(r, set.n()) = set.matrix;
    r += set.n();
    labels.insert(labels.end(), static_cast<std::size_t>(set.n()), name);
  }

  ordered_json options{{"method", a.method}};
  ordered_json result;
  Projection2D proj;
  if (a.method == "pca") {
    proj = pca_2d(x, labels);
  } else {
    TsneConfig tc;
    tc.perplexity = a.perplexity;
    tc.iterations = a.iterations;
    tc.learning_rate = a.learning_rate;
    tc.seed = cfg.seed;
    tc.threads = cfg.threads;
    options["perplexity"] = a.perplexity;
    options["iterations"] = a.iterations;
    options["learning_rate"] = a.learning_rate;
    const auto res = tsne_2d(x, tc, labels);
    proj = res.projection;
    result["initial_kl"] = res.initial_kl;
    result["final_kl"] = res.final_kl;
  }
  result["points"] = proj.coords.rows();

  std::string csv = "label,x,y\n";
  std::map<std::string, SvgSeries> by_label;
  for (Eigen::Index i = 0; i < proj.coords.rows(); ++i) {
    const auto& lab = proj.labels[static_cast<std::size_t>(i)];
    csv += csv_field(lab) + "," + format_number(proj.coords(i, 0)) + "," + format_number(proj.coords(i, 1)) + "\n";
    auto& s = by_label[lab];
    s.label = lab;
    s.line = false;
    s.points.emplace_back(proj.coords(i, 0), proj.coords(i, 1));
  }
  const fs::path dir = cfg.out;
  write_text(dir / "projection.csv", csv);
  auto doc = report_header("project", cfg, options, inputs);
  doc["result"] = result;
  write_json(dir / "projection.json", doc);
  if (cfg.svg) {
    std::vector<SvgSeries> series;
    for (auto& [lab, s] : by_label) series.push_back(std::move(s));
    write_text(dir / "projection.svg", render_svg(a.method == "pca" ? "PCA" : "t-SNE", "dim 1", "dim 2", series));
  }
  out << "projected " << proj.coords.rows() << " points with " << a.method << "\n";
  return 0;
}

// ---- synth ----------------------------------------------------------------

int cmd_synth(const RunConfig& cfg, const std::string& scenario_path, bool seed_given, std::ostream& out) {
  const auto bytes = read_file_bytes(scenario_path);
  auto scenario = parse_synth_scenario({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
  if (seed_given) {
    scenario.seed = cfg.seed;
    if (scenario.detection) scenario.detection->seed = cfg.seed;
    if (scenario.embeddings) scenario.embeddings->seed = cfg.seed;
  }
  const fs::path dir = cfg.out;
  write_synth_tree(scenario, dir);

  std::vector<Input> inputs;
  add_file_input(inputs, "scenario", scenario_path);
  std::vector<std::pair<std::string, fs::path>> files;
  for (const char* sub : {"bundle", "embeddings", "frames"}) {
    if (!fs::exists(dir / sub)) continue;
    for (const auto& entry : fs::recursive_directory_iterator(dir / sub)) {
      if (entry.is_regular_file()) files.emplace_back(fs::relative(entry.path(), dir).generic_string(), entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  ordered_json outputs = ordered_json::array();
  std::size_t ppm = 0;
  for (const auto& [rel, path] : files) {
    if (path.extension() == ".ppm") {
      ++ppm;
      continue;
    }
    outputs.push_back({{"file", rel}, {"sha256", file_sha256(path)}});
  }
  auto doc = report_header("synth", cfg, ordered_json::object(), inputs);
  doc["result"] = {{"seed", scenario.seed}, {"outputs", outputs}, {"frame_fixtures", ppm}};
  write_json(dir / "synth.json", doc);
  out << "wrote " << files.size() << " files under " << dir.string() << "\n";
  return 0;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Embedding dissimilarity and detector generalization reports", "macekit"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", MACEKIT_VERSION);

  RunConfig cfg;
  auto* seed_opt = app.add_option("--seed", cfg.seed, "Bootstrap and generator seed")->capture_default_str();
  app.add_option("--resamples", cfg.resamples, "Bootstrap resamples")->capture_default_str();
  app.add_option("--margin", cfg.margin, "Non-inferiority margin")->capture_default_str();
  app.add_option("--fapm", cfg.fapm_points, "Operating points in false alarms per minute")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--window", cfg.window, "Median filter window (odd)")->capture_default_str();
  app.add_option("--iou", cfg.iou, "IoU needed to match a ground-truth box")->capture_default_str();
  app.add_option("--ce-rule", cfg.ce_rule, "JSON pixel rule for chromoendoscopy frames");
  app.add_option("--out", cfg.out, "Output directory")->capture_default_str();
  app.add_flag("--strict", cfg.strict, "Reject unknown fields in input records");
  app.add_flag("--svg", cfg.svg, "Also write SVG plots");
  app.add_option("--threads", cfg.threads, "Worker threads; results do not depend on it")->capture_default_str();

  ValidateArgs va;
  auto* validate_cmd = app.add_subcommand("validate", "Check a bundle and its embeddings");
  validate_cmd->add_option("--data", va.data, "Bundle directory")->required();
  validate_cmd->add_option("--embeddings", va.embeddings, "Embedding set as name=path (repeatable)");

  MaceArgs ma;
  auto* mace_cmd = app.add_subcommand("mace", "MACE distance with a bootstrap CI");
  mace_cmd->add_option("--a", ma.a, "First embedding file")->required();
  mace_cmd->add_option("--b", ma.b, "Second embedding file")->required();
  mace_cmd->add_option("--label", ma.label, "Comparison label");
  mace_cmd->add_option("--embedding-name", ma.embedding_name, "Embedding model name")->capture_default_str();
  mace_cmd->add_option("--unit", ma.unit, "Resampling unit: video or frame")->capture_default_str();

  MaceTestArgs mt;
  auto* mace_test_cmd = app.add_subcommand("mace-test", "Pairwise z-tests between MACE distributions");
  mace_test_cmd->add_option("--ref", mt.ref, "Reference embedding file")->required();
  mace_test_cmd->add_option("--group", mt.groups, "Group as name=path (repeatable)")->required();
  mace_test_cmd->add_option("--embedding-name", mt.embedding_name, "Embedding model name")->capture_default_str();
  mace_test_cmd->add_option("--unit", mt.unit, "Resampling unit: video or frame")->capture_default_str();
  mace_test_cmd->add_option("--alpha", mt.alpha, "Test level")->capture_default_str();

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "TPR vs FAPM curve, with comparison when two bundles are given");
  eval_cmd->add_option("--data", ea.data, "Bundle directory")->required();
  eval_cmd->add_option("--data-b", ea.data_b, "Second bundle directory");
  eval_cmd->add_option("--label-a", ea.label_a, "Label of the first bundle")->capture_default_str();
  eval_cmd->add_option("--label-b", ea.label_b, "Label of the second bundle")->capture_default_str();
  eval_cmd->add_option("--thresholds", ea.thresholds, "Score thresholds k/N, k = 1..N")->capture_default_str();

  CohortArgs ca;
  auto* cohort_cmd = app.add_subcommand("cohort", "Modality cohort sweep with non-inferiority tests");
  cohort_cmd->add_option("--data", ca.data, "Bundle directory")->required();
  cohort_cmd->add_option("--modality", ca.modality, "nbi or ce")->required();
  cohort_cmd->add_option("--frames-root", ca.frames_root, "Root of <video>/<frame>.ppm files");
  cohort_cmd->add_option("--step", ca.step, "Fraction threshold step")->capture_default_str();
  cohort_cmd->add_option("--min-cohort", ca.min_cohort, "Smallest cohort evaluated")->capture_default_str();
  cohort_cmd->add_option("--bins", ca.bins, "Histogram bins over [0,1]")->capture_default_str();
  cohort_cmd->add_option("--thresholds", ca.thresholds, "Score thresholds k/N, k = 1..N")->capture_default_str();

  ProjectArgs pa;
  auto* project_cmd = app.add_subcommand("project", "2-D projection of embedding sets");
  project_cmd->add_option("--set", pa.sets, "Embedding set as label=path (repeatable)")->required();
  project_cmd->add_option("--method", pa.method, "pca or tsne")->capture_default_str();
  project_cmd->add_option("--perplexity", pa.perplexity, "t-SNE perplexity")->capture_default_str();
  project_cmd->add_option("--iterations", pa.iterations, "t-SNE iterations")->capture_default_str();
  project_cmd->add_option("--learning-rate", pa.learning_rate, "t-SNE step size")->capture_default_str();

  std::string scenario_path;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic bundle and embeddings");
  synth_cmd->add_option("--scenario", scenario_path, "Scenario JSON")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    validate(cfg);
    if (*validate_cmd) return cmd_validate(cfg, va, out);
    if (*mace_cmd) return cmd_mace(cfg, ma, out);
    if (*mace_test_cmd) return cmd_mace_test(cfg, mt, out);
    if (*eval_cmd) return cmd_eval(cfg, ea, out);
    if (*cohort_cmd) return cmd_cohort(cfg, ca, out);
    if (*project_cmd) return cmd_project(cfg, pa, out);
    if (*synth_cmd) return cmd_synth(cfg, scenario_path, seed_opt->count() > 0, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: Io: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    err << "error: InvalidArgument: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace macekit::cli
