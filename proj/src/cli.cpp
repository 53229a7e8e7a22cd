#include "cindes/cli.hpp"

#include <CLI11.hpp>
#include <toml.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "cindes/dataset.hpp"
#include "cindes/dgp.hpp"
#include "cindes/diffusion.hpp"
#include "cindes/errors.hpp"
#include "cindes/io.hpp"

namespace cindes {
namespace fs = std::filesystem;

namespace {

struct Settings {
  TrainConfig train;
  DiffusionConfig diffusion;
  std::string dgp = "nonlinear";
  std::uint64_t structure_seed = 0;
  Eigen::Index n = 1000;
  Eigen::Index count = 1000;
  std::uint64_t seed = 0;
};

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    if (first == std::string::npos) throw UsageError(std::string("empty entry in ") + what);
    const std::string trimmed = item.substr(first, last - first + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), v);
    if (ec != std::errc() || ptr != trimmed.data() + trimmed.size())
      throw UsageError(std::string("cannot parse '") + trimmed + "' in " + what);
    values.push_back(v);
  }
  return values;
}

template <typename T>
void read_key(const toml::table& table, std::string_view key, T& target) {
  const toml::node* node = table.get(key);
  if (!node) return;
  if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node->value<bool>()) {
      target = *v;
      return;
    }
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node->value<std::string>()) {
      target = *v;
      return;
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (auto v = node->value<double>()) {
      target = *v;
      return;
    }
  } else {
    if (auto v = node->value<std::int64_t>()) {
      if (*v < 0 && std::is_unsigned_v<T>) throw UsageError("config key '" + std::string(key) + "' must be >= 0");
      target = static_cast<T>(*v);
      return;
    }
  }
  throw UsageError("config key '" + std::string(key) + "' has the wrong type");
}

void load_config(const std::string& path, Settings& s) {
  if (path.empty()) return;
  if (!fs::exists(path)) throw UsageError("config file " + path + " does not exist");
  toml::table root;
  try {
    root = toml::parse_file(path);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << path << ": " << e.description() << " (line " << e.source().begin.line << ")";
    throw UsageError(msg.str());
  }
  read_key(root, "seed", s.seed);
  if (const auto* t = root["train"].as_table()) {
    read_key(*t, "depth", s.train.shape.depth);
    read_key(*t, "width", s.train.shape.width);
    read_key(*t, "truncation", s.train.shape.truncation);
    read_key(*t, "max_epochs", s.train.max_epochs);
    read_key(*t, "batch_size", s.train.batch_size);
    read_key(*t, "lr", s.train.lr);
    read_key(*t, "valid_fraction", s.train.valid_fraction);
    read_key(*t, "patience", s.train.patience);
    read_key(*t, "norm_samples", s.train.norm_samples);
    read_key(*t, "valid_ref_draws", s.train.valid_ref_draws);
    read_key(*t, "valid_ref_draws_per_x", s.train.valid_ref_draws_per_x);
    if (const auto* grid = t->get_as<toml::array>("l2_grid")) {
      s.train.l2_grid.clear();
      for (const auto& v : *grid) {
        const auto d = v.value<double>();
        if (!d) throw UsageError("config key 'l2_grid' must hold numbers");
        s.train.l2_grid.push_back(*d);
      }
    }
  }
  if (const auto* t = root["diffusion"].as_table()) {
    read_key(*t, "T", s.diffusion.T);
    read_key(*t, "delta", s.diffusion.delta);
    read_key(*t, "M", s.diffusion.M);
    read_key(*t, "K", s.diffusion.K);
    read_key(*t, "seed", s.diffusion.seed);
    read_key(*t, "count", s.count);
    read_key(*t, "sqrt_alpha_update", s.diffusion.sqrt_alpha_update);
    read_key(*t, "clip_to_reference", s.diffusion.clip_to_reference);
  }
  if (const auto* t = root["dgp"].as_table()) {
    read_key(*t, "name", s.dgp);
    read_key(*t, "structure_seed", s.structure_seed);
    read_key(*t, "n", s.n);
  }
}

struct TrainFlags {
  std::optional<int> depth, width, max_epochs, batch_size, patience, norm_samples, valid_ref_draws_per_x;
  std::optional<double> truncation, lr, valid_fraction;
  std::optional<std::string> l2_grid;

  void add_to(CLI::App& app) {
    app.add_option("--depth", depth, "hidden layers");
    app.add_option("--width", width, "neurons per hidden layer");
    app.add_option("--truncation", truncation, "output truncation level R");
    app.add_option("--max-epochs", max_epochs);
    app.add_option("--batch-size", batch_size);
    app.add_option("--lr", lr, "Adam learning rate");
    app.add_option("--l2-grid", l2_grid, "comma-separated L2 penalties");
    app.add_option("--valid-fraction", valid_fraction);
    app.add_option("--patience", patience, "epochs without improvement before stopping");
    app.add_option("--norm-samples", norm_samples, "reference draws per normalizing constant");
    app.add_option("--valid-draws-per-x", valid_ref_draws_per_x,
                   "reference draws per validation covariate");
  }

  void apply(TrainConfig& c) const {
    if (depth) c.shape.depth = *depth;
    if (width) c.shape.width = *width;
    if (truncation) c.shape.truncation = *truncation;
    if (max_epochs) c.max_epochs = *max_epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (lr) c.lr = *lr;
    if (l2_grid) c.l2_grid = parse_list(*l2_grid, "--l2-grid");
    if (valid_fraction) c.valid_fraction = *valid_fraction;
    if (patience) c.patience = *patience;
    if (norm_samples) c.norm_samples = *norm_samples;
    if (valid_ref_draws_per_x) c.valid_ref_draws_per_x = *valid_ref_draws_per_x;
  }
};

struct DiffusionFlags {
  std::optional<double> T, delta;
  std::optional<int> M, K;
  bool rate_defaults = false;
  bool literal_alpha = false;
  bool clip = false;

  void add_to(CLI::App& app) {
    app.add_option("--T", T, "terminal time");
    app.add_option("--delta", delta, "early-stopping time");
    app.add_option("--M", M, "discretization steps (even)");
    app.add_option("--K", K, "Monte-Carlo draws per score evaluation");
    app.add_flag("--rate-defaults", rate_defaults,
                 "derive T, delta, M and K from the network size and training sample size");
    app.add_flag("--literal-alpha", literal_alpha, "scale the mean update by 1/alpha instead of 1/sqrt(alpha)");
    app.add_flag("--clip", clip, "clip draws to the reference box");
  }
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

Eigen::VectorXd parse_covariate(const std::string& text, int dx) {
  if (dx == 0) {
    if (!text.empty()) throw UsageError("--x given for an unconditional model");
    return Eigen::VectorXd(0);
  }
  if (text.empty()) throw UsageError("--x is required for a conditional model (" + std::to_string(dx) + " values)");
  const auto values = parse_list(text, "--x");
  if (static_cast<int>(values.size()) != dx)
    throw UsageError("--x needs " + std::to_string(dx) + " values, got " + std::to_string(values.size()));
  return Eigen::Map<const Eigen::VectorXd>(values.data(), dx);
}

std::string csv_header(const char* prefix, int d) {
  std::string h;
  for (int j = 1; j <= d; ++j) h += (j > 1 ? "," : "") + std::string(prefix) + std::to_string(j);
  return h;
}

void write_matrix_csv(std::ostream& out, const std::string& header, const Eigen::MatrixXd& m) {
  out << header << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const DomainError*>(&e)) return kExitUsage;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
      dynamic_cast<const CoverageError*>(&e))
    return kExitData;
  return kExitFailure;
}

}  // namespace

int worker_threads(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("CINDES_THREADS")) {
    int cap = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), cap);
    if (ec == std::errc() && ptr == s.data() + s.size() && cap >= 1) n = std::min(n, cap);
  }
  return std::max(1, n);
}

std::uint64_t trial_seed(std::uint64_t master, Eigen::Index n, int rep) {
  return stream_seed(stream_seed(master, "benchmark-size", static_cast<std::uint64_t>(n)), "replication",
                     static_cast<std::uint64_t>(rep));
}

BenchmarkRow run_trial(const BenchmarkConfig& config, const DgpSpec& spec, Eigen::Index n, int rep) {
  BenchmarkRow row;
  row.experiment = spec.label();
  row.n = n;
  row.seed = trial_seed(config.seed, n, rep);
  try {
    RandomEngine data_rng = make_engine(row.seed, "data");
    const Dataset data = sample_joint(spec, n, data_rng);
    TrainConfig train = config.train;
    train.seed = stream_seed(row.seed, "fit");
    const FitResult fitted = fit(data, train);
    row.selected_l2 = fitted.selected_l2;

    RandomEngine tv_rng = make_engine(row.seed, "tv");
    row.tv = model_tv(fitted.model, spec, config.tv_design.value_or(default_tv_design(spec)), tv_rng);
    RandomEngine nll_rng = make_engine(row.seed, "nll");
    const Dataset test = sample_joint(spec, config.nll_test, nll_rng);
    row.nll = normalized_nll(fitted.model, test, config.nll_ref_draws, nll_rng).nll;
    row.ok = std::isfinite(row.tv) && std::isfinite(row.nll);
    if (!row.ok) row.error = "non-finite metric";
  } catch (const Error& e) {
    row.ok = false;
    row.error = e.what();
  }
  return row;
}

std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config) {
  if (config.reps < 0) throw UsageError("benchmark needs reps >= 0");
  for (auto n : config.sizes)
    if (n < 8) throw UsageError("benchmark sample sizes must be >= 8");
  config.train.validate();
  const DgpSpec spec = make_dgp(config.dgp, config.structure_seed);

  struct Job {
    Eigen::Index n;
    int rep;
  };
  std::vector<Job> jobs;
  for (auto n : config.sizes)
    for (int r = 0; r < config.reps; ++r) jobs.push_back({n, r});
  std::vector<BenchmarkRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) rows[i] = run_trial(config, spec, jobs[i].n, jobs[i].rep);
  };
  const int workers = std::clamp<int>(config.threads, 1, std::max<int>(1, static_cast<int>(jobs.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return rows;
}

std::vector<BenchmarkSummary> summarize(const std::vector<BenchmarkRow>& rows) {
  std::vector<BenchmarkSummary> out;
  for (const auto& row : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& s) { return s.n == row.n; });
    if (it == out.end()) {
      out.push_back(BenchmarkSummary{row.n});
      it = out.end() - 1;
    }
    row.ok ? ++it->ok : ++it->failed;
  }
  for (auto& s : out) {
    double tv_sum = 0.0, nll_sum = 0.0;
    for (const auto& row : rows)
      if (row.ok && row.n == s.n) {
        tv_sum += row.tv;
        nll_sum += row.nll;
      }
    if (s.ok == 0) continue;
    s.tv_mean = tv_sum / s.ok;
    s.nll_mean = nll_sum / s.ok;
    double tv_ss = 0.0, nll_ss = 0.0;
    for (const auto& row : rows)
      if (row.ok && row.n == s.n) {
        tv_ss += (row.tv - s.tv_mean) * (row.tv - s.tv_mean);
        nll_ss += (row.nll - s.nll_mean) * (row.nll - s.nll_mean);
      }
    if (s.ok > 1) {
      s.tv_std = std::sqrt(tv_ss / (s.ok - 1));
      s.nll_std = std::sqrt(nll_ss / (s.ok - 1));
    }
  }
  return out;
}

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
  out << "experiment,n,seed,status,tv,nll,selected_l2\n";
  for (const auto& r : rows) {
    out << r.experiment << ',' << r.n << ',' << r.seed << ',' << (r.ok ? "ok" : "failed") << ',';
    if (r.ok)
      out << format_double(r.tv) << ',' << format_double(r.nll) << ',' << format_double(r.selected_l2);
    else
      out << ",,";
    out << '\n';
  }
  if (rows.empty()) return;
  for (const auto& s : summarize(rows)) {
    if (s.ok == 0) continue;
    out << rows.front().experiment << ',' << s.n << ",,mean," << format_double(s.tv_mean) << ','
        << format_double(s.nll_mean) << ",\n";
    out << rows.front().experiment << ',' << s.n << ",,std," << format_double(s.tv_std) << ','
        << format_double(s.nll_std) << ",\n";
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Classification-based conditional density estimation and diffusion sampling", "cindes"};
  app.require_subcommand(1);
  Settings s;
  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  TrainFlags train_flags;
  DiffusionFlags diffusion_flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "TOML file with [train], [diffusion] and [dgp] sections")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed_flag, "master seed");
  };

  // dgp
  auto* dgp_cmd = app.add_subcommand("dgp", "sample a synthetic dataset to CSV");
  std::optional<std::string> dgp_name;
  std::optional<std::uint64_t> structure_seed;
  std::optional<Eigen::Index> n_flag;
  std::string data_out, spec_out;
  add_common(dgp_cmd);
  std::string dgp_action;
  dgp_cmd->add_option("action", dgp_action, "optional 'export'")->check(CLI::IsMember({"export"}));
  dgp_cmd->add_option("--name,--spec", dgp_name,
                      "spherical, elliptical, nonlinear, additive, cond-mixture or linear");
  dgp_cmd->add_option("--structure-seed", structure_seed);
  dgp_cmd->add_option("--n", n_flag, "number of observations");
  dgp_cmd->add_option("--out", data_out, "output CSV (default: stdout)");
  dgp_cmd->add_option("--spec-out", spec_out, "write the DGP description as JSON");

  // train
  auto* train_cmd = app.add_subcommand("train", "fit a density model to a CSV dataset");
  std::string data_in, model_out, log_out;
  add_common(train_cmd);
  train_flags.add_to(*train_cmd);
  train_cmd->add_option("--data", data_in, "input CSV (x1..,y1..)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--model-out", model_out, "model JSON")->required();
  train_cmd->add_option("--log", log_out, "training log JSON (default: <model-out>.log.json)");

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "draw responses from a model with the diffusion sampler");
  std::string model_in, x_text, samples_out;
  std::optional<Eigen::Index> count_flag;
  std::optional<int> threads_flag;
  add_common(sample_cmd);
  diffusion_flags.add_to(*sample_cmd);
  sample_cmd->add_option("--model", model_in, "model JSON")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("--x", x_text, "comma-separated covariate");
  sample_cmd->add_option("--count", count_flag, "number of draws");
  sample_cmd->add_option("--n", n_flag, "training sample size, used by --rate-defaults");
  sample_cmd->add_option("--threads", threads_flag);
  sample_cmd->add_option("--out", samples_out, "output CSV (default: stdout)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "TV and normalized NLL of a model against a DGP");
  std::string test_in, report_out;
  std::optional<Eigen::Index> n_test, tv_covariates, tv_responses;
  add_common(eval_cmd);
  eval_cmd->add_option("--model", model_in, "model JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--dgp", dgp_name, "ground-truth DGP");
  eval_cmd->add_option("--structure-seed", structure_seed);
  eval_cmd->add_option("--test", test_in, "test CSV for the NLL (default: fresh DGP draws)")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--n-test", n_test, "fresh test draws for the NLL")->default_val(1000);
  eval_cmd->add_option("--tv-covariates", tv_covariates);
  eval_cmd->add_option("--tv-responses", tv_responses);
  eval_cmd->add_option("--out", report_out, "report JSON (default: stdout)");

  // benchmark
  auto* bench_cmd = app.add_subcommand("benchmark", "replicated fit-and-evaluate runs on a DGP");
  std::string sizes_text, bench_out;
  std::optional<int> reps_flag;
  add_common(bench_cmd);
  train_flags.add_to(*bench_cmd);
  bench_cmd->add_option("--dgp", dgp_name, "DGP name or table label")->required();
  bench_cmd->add_option("--structure-seed", structure_seed);
  bench_cmd->add_option("--n", sizes_text, "comma-separated sample sizes")->default_val("500");
  bench_cmd->add_option("--reps", reps_flag, "replications per sample size");
  bench_cmd->add_option("--threads", threads_flag, "worker pool size (default: cores, capped by CINDES_THREADS)");
  bench_cmd->add_option("--tv-covariates", tv_covariates);
  bench_cmd->add_option("--tv-responses", tv_responses);
  bench_cmd->add_option("--out", bench_out, "results CSV (default: stdout)");

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "normalized density on a grid over the reference box");
  std::optional<int> resolution;
  std::string grid_out;
  add_common(grid_cmd);
  grid_cmd->add_option("--model", model_in, "model JSON")->required()->check(CLI::ExistingFile);
  grid_cmd->add_option("--x", x_text, "comma-separated covariate");
  grid_cmd->add_option("--resolution", resolution, "points per axis")->default_val(100);
  grid_cmd->add_option("--out", grid_out, "output CSV (default: stdout)");

  std::vector<std::string> argv_store{"cindes"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "cindes: " << e.what() << '\n';
    if (e.get_exit_code() == 0) return kExitOk;
    return kExitUsage;
  }

  try {
    load_config(config_path, s);
    if (seed_flag) s.seed = *seed_flag;
    if (dgp_name) s.dgp = *dgp_name;
    if (structure_seed) s.structure_seed = *structure_seed;
    train_flags.apply(s.train);

    if (dgp_cmd->parsed()) {
      if (n_flag) s.n = *n_flag;
      if (s.n < 1) throw UsageError("--n must be >= 1");
      const DgpSpec spec = make_dgp(s.dgp, s.structure_seed);
      RandomEngine rng = make_engine(s.seed, "dgp-data");
      const Dataset data = sample_joint(spec, s.n, rng);
      if (data_out.empty())
        write_csv(out, data);
      else
        write_csv(fs::path(data_out), data);
      if (!spec_out.empty()) open_output(spec_out) << dgp_to_json(spec).dump(2) << '\n';
      return kExitOk;
    }

    if (train_cmd->parsed()) {
      s.train.seed = s.seed;
      const Dataset data = read_csv(fs::path(data_in));
      const FitResult fitted = fit(data, s.train);
      save_model(model_out, fitted.model);
      const std::string log_path = log_out.empty() ? model_out + ".log.json" : log_out;
      open_output(log_path) << traces_to_json(fitted).dump(2) << '\n';
      for (const auto& t : fitted.traces)
        out << "l2=" << format_double(t.l2) << " best_valid_nll=" << fixed(t.best_valid_nll, 6)
            << " best_epoch=" << t.best_epoch << " epochs=" << t.epochs.size() << '\n';
      out << "selected_l2=" << format_double(fitted.selected_l2) << '\n';
      return kExitOk;
    }

    if (sample_cmd->parsed()) {
      const DensityModel model = load_model(model_in);
      if (diffusion_flags.rate_defaults) {
        const auto seed = s.diffusion.seed;
        s.diffusion = DiffusionConfig::rate_defaults(model.params().shape, n_flag.value_or(s.n));
        s.diffusion.seed = seed;
      }
      if (diffusion_flags.T) s.diffusion.T = *diffusion_flags.T;
      if (diffusion_flags.delta) s.diffusion.delta = *diffusion_flags.delta;
      if (diffusion_flags.M) s.diffusion.M = *diffusion_flags.M;
      if (diffusion_flags.K) s.diffusion.K = *diffusion_flags.K;
      if (diffusion_flags.literal_alpha) s.diffusion.sqrt_alpha_update = false;
      if (diffusion_flags.clip) s.diffusion.clip_to_reference = true;
      if (seed_flag) s.diffusion.seed = *seed_flag;
      if (count_flag) s.count = *count_flag;
      if (s.count < 0) throw UsageError("--count must be >= 0");
      s.diffusion.validate();
      const Eigen::VectorXd x = parse_covariate(x_text, model.dx());
      SamplerStats stats;
      const Eigen::MatrixXd draws =
          sample_batch(model, x, s.diffusion, s.count, 0, worker_threads(threads_flag.value_or(0)), &stats);
      if (samples_out.empty()) {
        write_matrix_csv(out, csv_header("y", model.dy()), draws);
      } else {
        auto f = open_output(samples_out);
        write_matrix_csv(f, csv_header("y", model.dy()), draws);
      }
      if (stats.degenerate_scores > 0)
        err << "cindes: " << stats.degenerate_scores
            << " score evaluations had no reference support; used the moment-matched Gaussian score\n";
      return kExitOk;
    }

    if (eval_cmd->parsed()) {
      const DensityModel model = load_model(model_in);
      const DgpSpec spec = make_dgp(s.dgp, s.structure_seed);
      TvDesign design = default_tv_design(spec);
      if (tv_covariates) design.n_covariates = *tv_covariates;
      if (tv_responses) design.n_responses = *tv_responses;
      design.norm_samples = model.norm_samples();
      EvalReport report;
      report.seed = s.seed;
      RandomEngine tv_rng = make_engine(s.seed, "eval-tv");
      report.tv = model_tv(model, spec, design, tv_rng);
      RandomEngine nll_rng = make_engine(s.seed, "eval-nll");
      const Dataset test = test_in.empty() ? sample_joint(spec, *n_test, nll_rng) : read_csv(fs::path(test_in));
      const NllResult nll = normalized_nll(model, test, model.norm_samples(), nll_rng);
      report.nll = nll.nll;
      report.n_test = nll.evaluated;
      report.nll_outside_support = nll.outside_support;
      const std::string text = report_to_json(report).dump(2);
      if (report_out.empty())
        out << text << '\n';
      else
        open_output(report_out) << text << '\n';
      return kExitOk;
    }

    if (bench_cmd->parsed()) {
      BenchmarkConfig bc;
      bc.dgp = s.dgp;
      bc.structure_seed = s.structure_seed;
      bc.seed = s.seed;
      bc.train = s.train;
      bc.reps = reps_flag.value_or(5);
      bc.sizes.clear();
      for (double v : parse_list(sizes_text, "--n")) {
        if (v != std::floor(v) || v < 8) throw UsageError("--n entries must be integers >= 8");
        bc.sizes.push_back(static_cast<Eigen::Index>(v));
      }
      const DgpSpec spec = make_dgp(bc.dgp, bc.structure_seed);
      if (tv_covariates || tv_responses) {
        TvDesign d = default_tv_design(spec);
        if (tv_covariates) d.n_covariates = *tv_covariates;
        if (tv_responses) d.n_responses = *tv_responses;
        bc.tv_design = d;
      }
      bc.threads = worker_threads(threads_flag.value_or(0));
      const auto rows = run_benchmark(bc);
      if (bench_out.empty()) {
        write_benchmark_csv(out, rows);
      } else {
        auto f = open_output(bench_out);
        write_benchmark_csv(f, rows);
        for (const auto& sm : summarize(rows)) {
          out << spec.label() << " n=" << sm.n << ": TV " << fixed(sm.tv_mean, 4) << " ± " << fixed(sm.tv_std, 4)
              << ", NLL " << fixed(sm.nll_mean, 4) << " ± " << fixed(sm.nll_std, 4) << " (" << sm.ok << " ok";
          if (sm.failed) out << ", " << sm.failed << " failed";
          out << ")\n";
        }
      }
      for (const auto& r : rows)
        if (!r.ok) err << "cindes: trial n=" << r.n << " seed=" << r.seed << " failed: " << r.error << '\n';
      return kExitOk;
    }

    if (grid_cmd->parsed()) {
      DensityModel model = load_model(model_in);
      if (model.dy() > 2) throw ShapeError("grid supports one- or two-dimensional responses only");
      if (*resolution < 2) throw UsageError("--resolution must be >= 2");
      if (!model.reference().is_box()) throw UsageError("grid needs a model with a uniform box reference");
      const Eigen::VectorXd x = parse_covariate(x_text, model.dx());
      RandomEngine rng = make_engine(s.seed, "grid-normalizer");
      const double log_z = std::log(normalize(model, x, model.norm_samples(), rng));
      const auto& box = model.reference().box();
      const int res = *resolution;
      const int d = model.dy();
      const Eigen::Index points = d == 1 ? res : static_cast<Eigen::Index>(res) * res;
      Eigen::MatrixXd ys(points, d);
      for (Eigen::Index p = 0; p < points; ++p) {
        const Eigen::Index i = d == 1 ? p : p / res;
        ys(p, 0) = i == res - 1 ? box.hi(0) : box.lo(0) + (box.hi(0) - box.lo(0)) * static_cast<double>(i) / (res - 1);
        if (d == 2) {
          const Eigen::Index j = p % res;
          ys(p, 1) = j == res - 1 ? box.hi(1)
                                  : box.lo(1) + (box.hi(1) - box.lo(1)) * static_cast<double>(j) / (res - 1);
        }
      }
      Eigen::MatrixXd table(points, d + 1);
      table.leftCols(d) = ys;
      table.col(d) = (model.log_density_batch(ys, x).array() - log_z).exp();
      const std::string header = csv_header("y", d) + ",density";
      if (grid_out.empty()) {
        write_matrix_csv(out, header, table);
      } else {
        auto f = open_output(grid_out);
        write_matrix_csv(f, header, table);
      }
      return kExitOk;
    }
  } catch (const std::exception& e) {
    err << "cindes: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitUsage;
}

}  // namespace cindes
