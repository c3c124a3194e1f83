/*
 * Copyright 2026 The brsvd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "brsvd/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "brsvd/cost.hpp"
#include "brsvd/frames.hpp"
#include "brsvd/randomized_svd.hpp"
#include "brsvd/rpca.hpp"
#include "brsvd/synthetic.hpp"

namespace brsvd {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kBudgetEnv = "BRSVD_MEMORY_BUDGET";

std::uint64_t resolve_budget(const std::string& flag) {
  if (!flag.empty()) return parse_bytes(flag);
  if (const char* env = std::getenv(kBudgetEnv); env != nullptr && *env != '\0') return parse_bytes(env);
  return kUnlimitedBudget;
}

ElementType parse_precision(const std::string& p) {
  if (p == "f64" || p == "double") return ElementType::f64;
  if (p == "f32" || p == "float") return ElementType::f32;
  throw ConfigError("unknown precision '" + p + "' (expected f32 or f64)");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct SvdOptions {
  std::string input;
  Index rank = 10;
  Index oversample = 10;
  int power = 1;
  std::string partitions = "auto";
  std::string budget;
  std::uint64_t seed = 0;
  std::string precision;
  std::string report;
  std::string stats_jsonl;
  std::string output_prefix;
  bool prefetch = false;
  bool skip_error = false;
};

SketchConfig sketch_config(const SvdOptions& o) {
  SketchConfig cfg;
  cfg.target_rank = o.rank;
  cfg.oversampling = o.oversample;
  cfg.power_exponent = o.power;
  cfg.memory_budget = resolve_budget(o.budget);
  cfg.master_seed = o.seed;
  cfg.prefetch = o.prefetch;
  if (o.partitions != "auto") {
    try {
      cfg.partitions = std::stoll(o.partitions);
    } catch (const std::exception&) {
      throw ConfigError("--partitions must be a positive integer or 'auto', got '" + o.partitions + "'");
    }
  }
  return cfg;
}

template <RealScalar Scalar>
void write_factors(const std::string& prefix, const SvdFactors<Scalar>& f) {
  auto put = [](const std::string& path, const Mat<Scalar>& m) {
    auto store = MatrixStore::create(path, m.rows(), m.cols(), element_type_of<Scalar>(), true);
    store.template write_block<Scalar>({0, m.cols()}, m);
  };
  put(prefix + ".U.oocm", f.U);
  put(prefix + ".S.oocm", Mat<Scalar>(f.sigma));
  put(prefix + ".Vt.oocm", f.Vt);
}

template <RealScalar Scalar>
int run_svd(const SvdOptions& o, bool naive, std::ostream& out) {
  const auto store = MatrixStore::open(o.input);
  const auto cfg = sketch_config(o);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = naive ? rsvd_naive_ooc<Scalar>(store, cfg) : brsvd_run<Scalar>(store, cfg);
  const double seconds = seconds_since(t0);
  std::optional<double> error;
  if (!o.skip_error) error = relative_frobenius_error<Scalar>(store, res.factors);

  const auto passes = res.stats.full_passes();
  json stages = json::array();
  for (const auto& st : res.stats.stages) {
    stages.push_back({{"stage", st.stage}, {"words_read", st.words_read}, {"words_written", st.words_written},
                      {"seconds", st.seconds}});
  }
  std::vector<double> sigma(static_cast<std::size_t>(res.factors.sigma.size()));
  for (Index i = 0; i < res.factors.sigma.size(); ++i) sigma[static_cast<std::size_t>(i)] = res.factors.sigma(i);
  json report{{"variant", naive ? "naive" : "proposed"},
              {"input", o.input},
              {"m", store.rows()},
              {"n", store.cols()},
              {"k", cfg.target_rank},
              {"p", cfg.oversampling},
              {"q", cfg.power_exponent},
              {"l", cfg.l()},
              {"s", res.plan.s()},
              {"n_prime", res.plan.n_prime},
              {"memory_budget", cfg.memory_budget == kUnlimitedBudget ? json("unlimited") : json(cfg.memory_budget)},
              {"resident_bytes", res.plan.resident_bytes},
              {"precision", to_string(element_type_of<Scalar>())},
              {"seed", cfg.master_seed},
              {"full_passes", passes.value()},
              {"full_passes_exact", std::to_string(passes.num) + "/" + std::to_string(passes.den)},
              {"words_read", res.stats.words_read},
              {"words_written", res.stats.words_written},
              {"block_reads", res.stats.block_reads},
              {"flop_estimate", res.stats.flop_estimate},
              {"sample_rank", res.sample_rank},
              {"rank_warning", res.rank_warning},
              {"seconds", seconds},
              {"stages", stages},
              {"sigma", sigma},
              {"relative_error", error ? json(*error) : json(nullptr)}};

  if (!o.report.empty()) write_text(o.report, report.dump(2) + "\n");
  if (!o.stats_jsonl.empty()) write_text(o.stats_jsonl, res.stats.to_json_lines());
  if (!o.output_prefix.empty()) write_factors(o.output_prefix, res.factors);
  out << report.dump(2) << "\n";
  return 0;
}

int dispatch_svd(const SvdOptions& o, bool naive, std::ostream& out) {
  ElementType type;
  if (o.precision.empty()) type = MatrixStore::open(o.input).element_type();
  else type = parse_precision(o.precision);
  return type == ElementType::f64 ? run_svd<double>(o, naive, out) : run_svd<float>(o, naive, out);
}

struct GenOptions {
  std::string output;
  Index m = 0, n = 0, rank = 0;
  std::string ratio;
  std::string size;
  std::string precision = "f64";
  std::uint64_t seed = 0;
  bool overwrite = false;
};

int run_gen(const GenOptions& o, std::ostream& out) {
  SyntheticSpec spec;
  const ElementType type = parse_precision(o.precision);
  if (!o.ratio.empty()) {
    if (o.size.empty()) throw ConfigError("--ratio needs --size");
    const auto r = parse_ratio(o.ratio);
    spec = SyntheticSpec::from_ratio(r[0], r[1], r[2], parse_bytes(o.size), type, o.seed, o.rank);
  } else {
    if (o.m < 1 || o.n < 1 || o.rank < 1) throw ConfigError("gen needs --m, --n and --rank, or --ratio and --size");
    spec = SyntheticSpec{o.m, o.n, o.rank, type, o.seed};
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto store = gen_lowrank(spec, o.output, o.overwrite);
  json j{{"output", o.output}, {"m", spec.m}, {"n", spec.n}, {"rank", spec.k}, {"precision", to_string(type)},
         {"seed", spec.seed}, {"bytes", store.file_bytes()}, {"seconds", seconds_since(t0)}};
  out << j.dump(2) << "\n";
  return 0;
}

struct RpcaOptions {
  std::string input;
  std::string frames;
  std::string pattern = "*.pgm";
  Index rank = 10;
  Index oversample = 10;
  int power = 1;
  std::optional<double> lambda;
  std::optional<double> mu0;
  double rho = 1.5;
  double tol = 1e-7;
  int max_iters = 100;
  std::uint64_t seed = 0;
  std::string budget;
  std::string output_lowrank;
  std::string output_sparse;
  std::string trace;
  std::string report;
};

int run_rpca(const RpcaOptions& o, std::ostream& out) {
  if (o.input.empty() == o.frames.empty()) throw ConfigError("rpca needs exactly one of --input or --frames");
  RpcaConfig cfg;
  cfg.target_rank = o.rank;
  cfg.oversampling = o.oversample;
  cfg.power_exponent = o.power;
  cfg.lambda = o.lambda;
  cfg.mu0 = o.mu0;
  cfg.rho = o.rho;
  cfg.tol = o.tol;
  cfg.max_iterations = o.max_iters;
  cfg.master_seed = o.seed;
  cfg.memory_budget = resolve_budget(o.budget);

  std::optional<FrameStack> stack;
  Mat<double> m;
  if (!o.frames.empty()) {
    const fs::path tmp = fs::temp_directory_path() / ("brsvd_frames_" + std::to_string(std::random_device{}()) + ".oocm");
    {
      auto ingested = ingest_frames(o.frames, o.pattern, tmp, ElementType::f64, true);
      stack = ingested.stack;
      m = ingested.store.read_all<double>();
    }
    std::error_code ec;
    fs::remove(tmp, ec);
    fs::remove(sidecar_path(tmp), ec);
  } else {
    m = MatrixStore::open(o.input).read_all<double>();
  }

  std::ofstream trace_file;
  if (!o.trace.empty()) {
    trace_file.open(o.trace, std::ios::trunc);
    if (!trace_file) throw IoError("cannot write " + o.trace);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = ialm_rpca<double>(m, cfg, [&](const RpcaIteration& it) {
    if (trace_file) {
      trace_file << json{{"i", it.i}, {"mu", it.mu}, {"residual", it.residual}, {"svd_seconds", it.svd_seconds},
                         {"iter_seconds", it.iter_seconds}}
                        .dump()
                 << "\n"
                 << std::flush;
    }
  });
  const double seconds = seconds_since(t0);

  auto save = [&](const std::string& target, const Mat<double>& x, ExportMode mode) {
    if (target.empty()) return;
    if (stack) {
      export_frames(x, *stack, target, mode);
    } else {
      auto store = MatrixStore::create(target, x.rows(), x.cols(), ElementType::f64, true);
      store.write_block<double>({0, x.cols()}, x);
    }
  };
  save(o.output_lowrank, res.L, ExportMode::clamp);
  save(o.output_sparse, res.S, ExportMode::rescale);

  json j{{"m", m.rows()},
         {"n", m.cols()},
         {"iterations", res.iterations},
         {"converged", res.converged},
         {"final_residual", res.residual_history.empty() ? 0.0 : res.residual_history.back()},
         {"lambda", res.lambda},
         {"mu0", res.mu0},
         {"rho", cfg.rho},
         {"tol", cfg.tol},
         {"seconds", seconds}};
  if (!o.report.empty()) write_text(o.report, j.dump(2) + "\n");
  out << j.dump(2) << "\n";
  return 0;
}

struct CostOptions {
  long long m = 0, n = 0, l = 0;
  int q = 0;
  std::string variant = "proposed";
  bool as_json = false;
};

int run_cost(const CostOptions& o, std::ostream& out) {
  const auto report = estimate_costs(o.m, o.n, o.l, o.q, parse_cost_variant(o.variant));
  out << (o.as_json ? report.to_json() + "\n" : report.to_text());
  return 0;
}

struct BenchOptions {
  std::vector<std::string> ratios{"1024:32:1", "256:256:1"};
  std::vector<std::string> sizes{"16MiB", "64MiB"};
  std::string budget = "8MiB";
  Index rank = 0;
  Index oversample = 10;
  int power = 1;
  std::string precision = "f64";
  std::string workdir;
  std::string csv;
  std::string max_size = "8GiB";
  std::uint64_t seed = 0;
  bool allow_large = false;
};

template <RealScalar Scalar>
void bench_store(const MatrixStore& store, const SketchConfig& cfg, const std::string& ratio, std::uint64_t size,
                 std::ostream& csv) {
  for (const bool naive : {false, true}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = naive ? rsvd_naive_ooc<Scalar>(store, cfg) : brsvd_run<Scalar>(store, cfg);
    const double seconds = seconds_since(t0);
    const double error = relative_frobenius_error<Scalar>(store, res.factors);
    csv << size << ',' << ratio << ',' << (naive ? "naive" : "proposed") << ',' << store.rows() << ','
        << store.cols() << ',' << cfg.target_rank << ',' << cfg.power_exponent << ',' << res.plan.s() << ','
        << res.stats.full_passes().value() << ',' << seconds << ',' << error << '\n'
        << std::flush;
  }
}

int run_bench(const BenchOptions& o, std::ostream& out) {
  const ElementType type = parse_precision(o.precision);
  const std::uint64_t cap = parse_bytes(o.max_size);
  const fs::path work = o.workdir.empty() ? fs::temp_directory_path() / "brsvd_bench" : fs::path(o.workdir);
  fs::create_directories(work);
  std::ofstream csv_file;
  if (!o.csv.empty()) {
    csv_file.open(o.csv, std::ios::trunc);
    if (!csv_file) throw IoError("cannot write " + o.csv);
  }
  std::ostream& csv = o.csv.empty() ? out : csv_file;
  csv << "size_bytes,ratio,variant,m,n,k,q,s,passes,seconds,error\n";
  for (const auto& ratio_text : o.ratios) {
    const auto r = parse_ratio(ratio_text);
    for (const auto& size_text : o.sizes) {
      const std::uint64_t size = parse_bytes(size_text);
      if (size > cap && !o.allow_large) {
        throw ConfigError("bench size " + size_text + " exceeds the cap " + o.max_size + " (pass --allow-large)");
      }
      const auto spec = SyntheticSpec::from_ratio(r[0], r[1], r[2], size, type, o.seed);
      const fs::path path = work / ("bench_" + std::to_string(spec.m) + "x" + std::to_string(spec.n) + ".oocm");
      {
        auto store = gen_lowrank(spec, path, true);
        (void)store;
      }
      const auto store = MatrixStore::open(path);
      SketchConfig cfg;
      cfg.target_rank = o.rank > 0 ? o.rank : spec.k;
      cfg.oversampling = std::min<Index>(o.oversample, std::min(spec.m, spec.n) - cfg.target_rank);
      cfg.power_exponent = o.power;
      cfg.memory_budget = resolve_budget(o.budget);
      cfg.master_seed = o.seed;
      if (type == ElementType::f64) bench_store<double>(store, cfg, ratio_text, store.file_bytes(), csv);
      else bench_store<float>(store, cfg, ratio_text, store.file_bytes(), csv);
      std::error_code ec;
      fs::remove(path, ec);
    }
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Out-of-core block randomized SVD and robust PCA"};
  app.name("brsvd");
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic exact low-rank .oocm store");
  gen_cmd->add_option("--output,-o", gen.output, "Output .oocm path")->required();
  gen_cmd->add_option("--m", gen.m, "Rows");
  gen_cmd->add_option("--n", gen.n, "Columns");
  gen_cmd->add_option("--rank,-k", gen.rank, "Exact rank (overrides the ratio's third entry)");
  gen_cmd->add_option("--ratio", gen.ratio, "Shape ratio m:n:k, e.g. 1024:32:1");
  gen_cmd->add_option("--size", gen.size, "Payload size with --ratio, e.g. 1GiB");
  gen_cmd->add_option("--precision", gen.precision, "f64 or f32");
  gen_cmd->add_option("--seed", gen.seed, "Master seed");
  gen_cmd->add_flag("--overwrite", gen.overwrite, "Replace an existing file");

  SvdOptions svd;
  auto add_svd_flags = [](CLI::App* cmd, SvdOptions& o) {
    cmd->add_option("--input,-i", o.input, "Input .oocm store")->required();
    cmd->add_option("--rank,-k", o.rank, "Target rank k");
    cmd->add_option("--oversample,-p", o.oversample, "Oversampling p");
    cmd->add_option("--power,-q", o.power, "Power iteration exponent q");
    cmd->add_option("--partitions,-s", o.partitions, "Partition count or 'auto'");
    cmd->add_option("--memory-budget", o.budget, "Fast-memory budget (bytes or 128MiB, 1GiB, ...)");
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--precision", o.precision, "f32 or f64 (default: store element type)");
    cmd->add_option("--report", o.report, "Write the JSON report here");
    cmd->add_option("--stats-jsonl", o.stats_jsonl, "Write per-stage pass statistics as JSON lines");
    cmd->add_option("--output-prefix", o.output_prefix, "Write <prefix>.U/.S/.Vt.oocm");
    cmd->add_flag("--prefetch", o.prefetch, "Read the next block while computing on the current one");
    cmd->add_flag("--skip-error", o.skip_error, "Skip the extra pass computing the relative error");
  };
  auto* svd_cmd = app.add_subcommand("svd", "Two-pass block randomized SVD of a store");
  add_svd_flags(svd_cmd, svd);
  SvdOptions naive;
  auto* naive_cmd = app.add_subcommand("svd-naive", "Randomized SVD re-streaming the store for every product");
  add_svd_flags(naive_cmd, naive);

  RpcaOptions rp;
  auto* rpca_cmd = app.add_subcommand("rpca", "Robust PCA (inexact ALM) of a store or a PGM frame directory");
  rpca_cmd->add_option("--input,-i", rp.input, "Input .oocm store");
  rpca_cmd->add_option("--frames", rp.frames, "Directory of P5 PGM frames");
  rpca_cmd->add_option("--pattern", rp.pattern, "Frame filename glob");
  rpca_cmd->add_option("--rank,-k", rp.rank, "Target rank k");
  rpca_cmd->add_option("--oversample,-p", rp.oversample, "Oversampling p");
  rpca_cmd->add_option("--power,-q", rp.power, "Power iteration exponent q");
  rpca_cmd->add_option("--lambda", rp.lambda, "Sparsity weight (default 1/sqrt(max(m,n)))");
  rpca_cmd->add_option("--mu0", rp.mu0, "Initial penalty (default 1.25/||M||_2)");
  rpca_cmd->add_option("--rho", rp.rho, "Penalty growth factor");
  rpca_cmd->add_option("--tol", rp.tol, "Relative residual tolerance");
  rpca_cmd->add_option("--max-iters", rp.max_iters, "Iteration cap");
  rpca_cmd->add_option("--seed", rp.seed, "Master seed");
  rpca_cmd->add_option("--memory-budget", rp.budget, "Decompose iterates above this size out of core");
  rpca_cmd->add_option("--output-lowrank", rp.output_lowrank, "Low-rank output (frame dir or .oocm)");
  rpca_cmd->add_option("--output-sparse", rp.output_sparse, "Sparse output (frame dir or .oocm)");
  rpca_cmd->add_option("--trace", rp.trace, "Per-iteration JSON lines");
  rpca_cmd->add_option("--report", rp.report, "Write the JSON summary here");

  CostOptions co;
  auto* cost_cmd = app.add_subcommand("cost", "Leading-order flop and word counts per stage");
  cost_cmd->add_option("--m", co.m, "Rows")->required();
  cost_cmd->add_option("--n", co.n, "Columns")->required();
  cost_cmd->add_option("--l", co.l, "Sketch width l = k + p")->required();
  cost_cmd->add_option("--q", co.q, "Power iteration exponent");
  cost_cmd->add_option("--variant", co.variant, "naive or proposed");
  cost_cmd->add_flag("--json", co.as_json, "JSON output");

  BenchOptions be;
  auto* bench_cmd = app.add_subcommand("bench", "Sweep sizes at fixed shape ratios; CSV of passes, time, error");
  bench_cmd->add_option("--ratio", be.ratios, "Shape ratios m:n:k");
  bench_cmd->add_option("--sizes", be.sizes, "Store sizes")->delimiter(',');
  bench_cmd->add_option("--memory-budget", be.budget, "Fast-memory budget");
  bench_cmd->add_option("--rank,-k", be.rank, "Target rank (default: the store's rank)");
  bench_cmd->add_option("--oversample,-p", be.oversample, "Oversampling p");
  bench_cmd->add_option("--power,-q", be.power, "Power iteration exponent q");
  bench_cmd->add_option("--precision", be.precision, "f64 or f32");
  bench_cmd->add_option("--workdir", be.workdir, "Scratch directory for generated stores");
  bench_cmd->add_option("--csv", be.csv, "CSV output path (default stdout)");
  bench_cmd->add_option("--max-size", be.max_size, "Largest size allowed without --allow-large");
  bench_cmd->add_option("--seed", be.seed, "Master seed");
  bench_cmd->add_flag("--allow-large", be.allow_large, "Permit sizes above --max-size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gen_cmd) return run_gen(gen, out);
    if (*svd_cmd) return dispatch_svd(svd, false, out);
    if (*naive_cmd) return dispatch_svd(naive, true, out);
    if (*rpca_cmd) return run_rpca(rp, out);
    if (*cost_cmd) return run_cost(co, out);
    if (*bench_cmd) return run_bench(be, out);
  } catch (const BudgetInfeasible& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace brsvd
