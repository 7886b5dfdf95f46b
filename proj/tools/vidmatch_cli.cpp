#include "vidmatch/experiments.hpp"
#include "vidmatch/io.hpp"
#include "vidmatch/matching.hpp"
#include "vidmatch/simulator.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace vidmatch;

namespace {

enum Exit { ok = 0, usage = 1, certification = 2, io_failure = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t workers = 0;
  std::optional<Index> k;
  std::optional<double> psi;
  std::optional<Index> gamma;
  std::vector<std::string> modes;
};

eval::ExperimentConfig load(const Common& c) {
  eval::ExperimentConfig cfg;
  if (!c.config.empty()) cfg = eval::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.workers) cfg.workers = c.workers;
  if (c.k) cfg.k_sweep = {*c.k};
  if (c.psi) cfg.psi = *c.psi;
  if (c.gamma) cfg.gamma = *c.gamma;
  if (!c.modes.empty()) {
    cfg.modes.clear();
    for (const auto& m : c.modes) cfg.modes.push_back(eval::parse_mode(m));
  }
  cfg.validate();
  return cfg;
}

void emit(const eval::Table& t, const fs::path& dir, const std::string& file) {
  const std::string csv = t.to_csv();
  std::cout << csv;
  fs::create_directories(dir);
  io::write_text(dir / file, csv);
}

void add_common(CLI::App* app, Common& c, bool sweep_flags = true) {
  app->add_option("--config", c.config, "key = value config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "override the config seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--workers", c.workers, "worker threads (0 = all cores)");
  app->add_option("--psi", c.psi, "strong-match bound (<= 0: 2 * max(epsilon, delta))");
  app->add_option("--gamma", c.gamma, "local search radius (0: ceil(psi/delta))");
  if (!sweep_flags) return;
  app->add_option("--k", c.k, "run a single stride instead of k_sweep")->check(CLI::PositiveNumber);
  app->add_option("--mode", c.modes, "restrict to these modes (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video matching and foreground extraction toolkit"};
  app.require_subcommand(1);

  // simulate ---------------------------------------------------------------
  struct {
    double level = 0.1;
    std::uint64_t seed = 1;
    Index frames = 100;
    double psi = 0.2;
    Index gamma = 0;
    std::string out;
  } sim_opt;
  auto* simulate = app.add_subcommand("simulate", "generate one synthetic instance bundle");
  simulate->add_option("--level", sim_opt.level, "key-point perturbation fraction")->check(CLI::Range(0.0, 0.99));
  simulate->add_option("--seed", sim_opt.seed, "instance seed");
  simulate->add_option("--frames", sim_opt.frames, "frames per sequence")->check(CLI::PositiveNumber);
  simulate->add_option("--psi", sim_opt.psi, "strong-match bound (<= 0: 2 * max(epsilon, delta))");
  simulate->add_option("--gamma", sim_opt.gamma, "local search radius (0: ceil(psi/delta))");
  simulate->add_option("--out", sim_opt.out, "bundle directory")->required();

  // match -----------------------------------------------------------------------
  struct {
    std::string fg, bg, distances, algorithm = "near-linear", out;
    Index k = 1;
    Index gamma = 1;
    double psi = 0.0;
  } match_opt;
  auto* match = app.add_subcommand("match", "match a foreground sequence to a background sequence");
  match->add_option("--fg", match_opt.fg, "foreground descriptor file");
  match->add_option("--bg", match_opt.bg, "background descriptor file");
  match->add_option("--distances", match_opt.distances, "precomputed n x m distance matrix (binary or CSV)");
  match->add_option("--algorithm", match_opt.algorithm, "naive | near-linear | local-search")
      ->check(CLI::IsMember({"naive", "near-linear", "local-search"}));
  match->add_option("--k", match_opt.k, "stride")->check(CLI::PositiveNumber);
  match->add_option("--gamma", match_opt.gamma, "local search radius");
  match->add_option("--psi", match_opt.psi, "strong-match bound (local-search)");
  match->add_option("--out", match_opt.out, "assignment CSV (default: stdout)");

  // extract -------------------------------------------------------------------------
  struct {
    std::string bundle, mode = "local-search-both", out;
    Index k = 1;
    Common common;
  } ext_opt;
  auto* extract = app.add_subcommand("extract", "extract foreground masks for a simulated bundle");
  extract->add_option("--bundle", ext_opt.bundle, "bundle directory")->required()->check(CLI::ExistingDirectory);
  extract->add_option("--mode", ext_opt.mode, "pipeline mode");
  extract->add_option("--k", ext_opt.k, "stride")->check(CLI::PositiveNumber);
  add_common(extract, ext_opt.common, false);

  Common exp_opt;
  auto* exp1 = app.add_subcommand("exp1", "precision/recall across perturbation levels");
  auto* exp2 = app.add_subcommand("exp2", "strong-match likelihood heatmaps");
  auto* exp3 = app.add_subcommand("exp3", "precision/recall across strides");
  auto* cert = app.add_subcommand("certify", "check the guaranteed bounds empirically");
  auto* bench = app.add_subcommand("bench", "evaluation counts and timing");
  for (auto* sub : {exp1, exp2, exp3, cert, bench}) add_common(sub, exp_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    if (*simulate) {
      sim::PathSpec path;
      path.perturbation_fraction = sim_opt.level;
      path.seed = sim_opt.seed;
      path.frames = sim_opt.frames;
      const auto inst = sim::generate_instance(path, sim::SceneSpec{}, sim_opt.psi, 2.0, sim_opt.gamma);
      io::write_bundle(sim_opt.out, inst);
      std::cout << "delta=" << io::format_double(inst.params.delta)
                << " epsilon=" << io::format_double(inst.params.epsilon)
                << " psi=" << io::format_double(inst.params.psi) << " gamma=" << inst.params.gamma << '\n';
      for (const auto& w : inst.params.warnings()) std::cerr << "warning: " << w << '\n';
      return ok;
    }

    if (*match) {
      FrameSequence<double> fg, bg;
      auto metric = DistanceMetric<double>::euclidean();
      if (!match_opt.distances.empty()) {
        auto table = io::read_matrix(match_opt.distances);
        fg = FrameSequence<double>::placeholder(table.rows(), SequenceKind::foreground);
        bg = FrameSequence<double>::placeholder(table.cols(), SequenceKind::background);
        metric = DistanceMetric<double>::precomputed(std::move(table));
      } else {
        if (match_opt.fg.empty() || match_opt.bg.empty())
          throw ConfigError("match needs --fg and --bg, or --distances");
        fg = io::read_descriptors(match_opt.fg, SequenceKind::foreground);
        bg = io::read_descriptors(match_opt.bg, SequenceKind::background);
      }
      MatchAssignment a;
      if (match_opt.algorithm == "naive") a = naive_match(fg, bg, metric);
      else if (match_opt.algorithm == "near-linear") a = near_linear_match(fg, bg, metric, match_opt.k);
      else a = full_pipeline_match(fg, bg, metric, match_opt.k, match_opt.gamma, match_opt.psi).assignment;
      const std::string comment = "algorithm=" + match_opt.algorithm + " k=" + std::to_string(match_opt.k) +
                                  " evaluations=" + std::to_string(a.distance_evaluations);
      if (match_opt.out.empty()) {
        std::cout << "# " << comment << "\nfg_id,bg_id,distance,provenance\n";
        for (Index i = 1; i <= a.size(); ++i)
          std::cout << i << ',' << a.match(i) << ','
                    << io::format_double(a.per_frame_distance[static_cast<std::size_t>(i - 1)]) << ','
                    << to_string(a.provenance[static_cast<std::size_t>(i - 1)]) << '\n';
      } else {
        io::write_assignment_csv(match_opt.out, a, comment);
      }
      std::cerr << "distance evaluations: " << a.distance_evaluations << '\n';
      return ok;
    }

    if (*extract) {
      auto cfg = load(ext_opt.common);
      const auto inst = io::read_bundle(ext_opt.bundle);
      cfg.frames = inst.fg.size();
      const auto mode = eval::parse_mode(ext_opt.mode);
      eval::HypothesisCache cache(inst, cfg);
      const auto result = eval::run_pipeline(inst, mode, ext_opt.k, cfg, cache);
      const fs::path dir = ext_opt.common.out.empty() ? fs::path(ext_opt.bundle) / "extracted"
                                                      : fs::path(ext_opt.common.out);
      fs::create_directories(dir);
      eval::PrecisionRecall total;
      for (std::size_t i = 0; i < result.masks.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "fg_%04zu.pgm", i + 1);
        io::write_pgm(dir / name, *result.masks[i]);
        total += eval::confusion(*result.masks[i], inst.fg_truth_masks[i]);
      }
      io::write_assignment_csv(dir / "assignment.csv", result.matching.assignment,
                               std::string("mode=") + eval::to_string(mode) + " k=" + std::to_string(ext_opt.k));
      auto show = [](std::optional<double> v) { return v ? io::format_double(*v) : std::string("NA"); };
      std::cout << "precision=" << show(total.precision()) << " recall=" << show(total.recall())
                << " gaps=" << result.gaps.size()
                << " evaluations=" << result.matching.assignment.distance_evaluations << '\n';
      return ok;
    }

    const auto cfg = load(exp_opt);
    const fs::path dir = cfg.output_dir;
    if (*exp1) {
      emit(eval::summary_table(eval::experiment1(cfg), "exp1", cfg, false), dir, "exp1.csv");
    } else if (*exp3) {
      emit(eval::summary_table(eval::experiment3(cfg), "exp3", cfg, true), dir, "exp3.csv");
    } else if (*exp2) {
      eval::Table t;
      t.header = "vidmatch exp2 seed=" + std::to_string(cfg.seed) + " config=" + eval::config_hash(cfg);
      t.columns = {"perturbation", "psi", "mean_delta", "gamma", "mean_run_length", "runs", "heatmap"};
      fs::create_directories(dir);
      for (const auto& h : eval::experiment2(cfg)) {
        char name[64];
        std::snprintf(name, sizeof name, "exp2_heatmap_%.4f.pgm", h.level);
        io::write_pgm(dir / name, Channel<double>(h.likelihood));
        t.rows.push_back({io::format_double(h.level), io::format_double(h.psi), io::format_double(h.mean_delta),
                          io::format_double(h.gamma), io::format_double(h.mean_run_length),
                          std::to_string(h.runs), name});
      }
      emit(t, dir, "exp2.csv");
    } else if (*cert) {
      const auto report = eval::certify(cfg);
      emit(report.table(cfg), dir, "certify.csv");
      io::write_text(dir / "certify_stride.csv", report.stride_table(cfg).to_csv());
      io::write_text(dir / "certify_vote.csv", report.vote_table(cfg).to_csv());
      if (!report.all_passed()) {
        std::cerr << "certification failed\n";
        return certification;
      }
    } else if (*bench) {
      emit(eval::bench_table(eval::bench(cfg), cfg), dir, "bench.csv");
    }
    return ok;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return usage;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return io_failure;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return io_failure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return usage;
  } catch (const std::out_of_range& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return usage;
  }
}
