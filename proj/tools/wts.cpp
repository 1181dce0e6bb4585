// SPDX-License-Identifier: Apache-2.0
//
// wts: command-line front end for the long-tailed noisy-label laboratory.
//
//   wts synth        generate a synthetic embedding dataset
//   wts corrupt      long-tail subsample and inject label noise
//   wts train        train a probe from a key = value config
//   wts eval         score a probe checkpoint
//   wts teacher-eval zero-shot accuracy of the frozen text prototypes
//   wts check        run the loss-identity oracles
//   wts sweep        methods x tau x seeds grid, CSV output

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "wts/wts.hpp"

namespace {

using namespace wts;

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("wts");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("WTS_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else if (level == "info") spdlog::set_level(spdlog::level::info);
  else throw Error("WTS_LOG must be one of error, info, debug (got '" + level + "')");
}

void write_json(const std::string& path, const nlohmann::json& j) {
  io::write_file(path, j.dump(2) + "\n");
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  SyntheticSpec spec;
  std::string out, test_out;
  std::size_t test_per_class = 0;
};

void cmd_synth(const SynthArgs& a) {
  const auto split = generate_synthetic_split(a.spec, a.test_out.empty() ? 0 : a.test_per_class);
  save_dataset(a.out, split.train);
  spdlog::info("wrote {} samples ({} classes, dim {}) to {}", split.train.size(), split.train.classes(),
               split.train.dim(), a.out);
  if (!a.test_out.empty()) {
    save_dataset(a.test_out, split.test);
    spdlog::info("wrote {} test samples to {}", split.test.size(), a.test_out);
  }
}

// --- corrupt ---------------------------------------------------------------

struct CorruptArgs {
  std::string in, out, labels_out, noise = "symmetric", mapping = "cyclic";
  double gamma = 0.0, imbalance_factor = 1.0;
  std::size_t n_max = 0;
  std::uint64_t seed = 0;
};

void cmd_corrupt(const CorruptArgs& a) {
  if (a.mapping != "cyclic") throw Error("unsupported --mapping '" + a.mapping + "' (only 'cyclic')");
  const EmbeddingDataset ds = load_dataset(a.in);
  const Labels& clean = ds.true_labels ? *ds.true_labels : ds.observed_labels;
  const auto pools = class_pools(clean, ds.classes());
  const std::size_t n_max = a.n_max ? a.n_max : pools[0].size();
  const auto lt = subsample_longtail(pools, a.imbalance_factor, n_max, a.seed);
  EmbeddingDataset out = ds.select(lt.indices);
  if (!out.true_labels) {
    Labels t(lt.indices.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = clean[lt.indices[i]];
    out.true_labels = std::move(t);
  }
  const auto kind = parse_noise_kind(a.noise);
  const auto matrix = build_matrix(kind, lt.histogram, a.gamma);
  const auto assignment = apply_noise(*out.true_labels, matrix, a.seed);
  out.observed_labels = assignment.observed_labels;
  save_dataset(a.out, out);
  if (!a.labels_out.empty()) save_label_assignment(a.labels_out, assignment);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < out.size(); ++i) flipped += (*out.true_labels)[i] != out.observed_labels[i];
  spdlog::info("kept {} of {} samples (IF {}), {} noise gamma {}: {} labels flipped", out.size(), ds.size(),
               a.imbalance_factor, a.noise, a.gamma, flipped);
}

// --- train -----------------------------------------------------------------

void write_switch_log(const std::string& path, const std::vector<BatchRecord>& batches) {
  std::ostringstream os;
  os << "epoch,batch,size,overlap_ratio,fired,a,loss,loss_observed,loss_teacher\n";
  os.precision(17);
  for (const auto& b : batches)
    os << b.epoch << ',' << b.batch << ',' << b.size << ',' << b.overlap_ratio << ',' << (b.fired ? 1 : 0) << ','
       << b.a << ',' << b.loss << ',' << b.loss_observed << ',' << b.loss_teacher << '\n';
  io::write_file(path, os.str());
}

void cmd_train(const std::string& config_path) {
  const auto kv = KeyValueConfig::load(config_path);
  const TrainConfig cfg = TrainConfig::from(kv);
  const EmbeddingDataset train_set = load_dataset(kv.str("train_data"));
  std::optional<EmbeddingDataset> test_set;
  if (kv.has("test_data")) test_set = load_dataset(kv.str("test_data"));
  const auto result = train(train_set, cfg, test_set ? &*test_set : nullptr, [](const EpochMetrics& e) {
    if (e.test)
      spdlog::debug("epoch {}: loss {:.4f} test {:.4f} mean OR {:.3f} fire {:.2f} T {:.4g}", e.epoch, e.train_loss,
                    e.test->overall, e.mean_overlap_ratio, e.fire_rate, e.temperature);
    else
      spdlog::debug("epoch {}: loss {:.4f} mean OR {:.3f} fire {:.2f} T {:.4g}", e.epoch, e.train_loss,
                    e.mean_overlap_ratio, e.fire_rate, e.temperature);
  });
  save_checkpoint(kv.str("checkpoint"), result.probe, result.log_temperature);
  write_json(kv.str("metrics"), to_json(result, cfg));
  if (kv.has("switch_log")) write_switch_log(kv.str("switch_log"), result.batches);
  if (!result.epochs.empty() && result.epochs.back().test)
    spdlog::info("final test accuracy {:.4f}", result.epochs.back().test->overall);
  spdlog::info("wrote {} and {}", kv.str("checkpoint"), kv.str("metrics"));
}

// --- eval / teacher-eval ---------------------------------------------------

std::vector<ClassGroup> groups_for(const EmbeddingDataset& data, const std::string& train_path) {
  if (!train_path.empty()) return group_split(training_histogram(load_dataset(train_path)));
  return group_split(training_histogram(data));
}

void report(const RunMetrics& m, const std::string& out) {
  const auto j = to_json(m);
  if (out.empty()) std::cout << j.dump(2) << '\n';
  else write_json(out, j);
  spdlog::info("overall {:.4f}  head {:.4f}  medium {:.4f}  tail {:.4f}", m.overall, m.groups.head, m.groups.medium,
               m.groups.tail);
}

void cmd_eval(const std::string& probe, const std::string& data, const std::string& train_path,
              const std::string& out) {
  const auto ck = load_checkpoint(probe);
  const auto ds = load_dataset(data);
  if (!ds.true_labels) throw Error("eval: dataset " + data + " has no true_labels");
  report(evaluate(ck.probe, ds, groups_for(ds, train_path)), out);
}

void cmd_teacher_eval(const std::string& data, const std::string& train_path, const std::string& out) {
  const auto ds = load_dataset(data);
  if (!ds.true_labels) throw Error("teacher-eval: dataset " + data + " has no true_labels");
  report(evaluate(TeacherHead(ds.text_embeddings), ds, groups_for(ds, train_path)), out);
}

// --- check -----------------------------------------------------------------

int cmd_check(bool corrupt_gradient) {
  checks::CheckOptions opt;
  opt.corrupt_gradient = corrupt_gradient;
  bool all = true;
  for (const auto& r : checks::run_all(opt)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  max_error=" << r.max_error
              << " tolerance=" << r.tolerance << '\n';
    if (!r.passed) {
      std::cout << "  failing case: " << r.failing_case << '\n';
      all = false;
    }
  }
  return all ? 0 : 1;
}

// --- sweep -----------------------------------------------------------------

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

int cmd_sweep(const std::string& config_path, const std::string& out, const std::string& summary_out) {
  const auto kv = KeyValueConfig::load(config_path);
  std::vector<std::uint64_t> seeds;
  for (const auto& s : kv.list("seeds")) seeds.push_back(KeyValueConfig::to_uint("seeds", s));
  std::vector<double> taus;
  for (const auto& t : kv.list("taus")) taus.push_back(KeyValueConfig::to_real("taus", t));
  if (seeds.empty()) throw Error("sweep: 'seeds' must list at least one seed");
  if (taus.empty()) throw Error("sweep: 'taus' must list at least one tau");
  const ScenarioSpec spec = ScenarioSpec::from(kv);
  KeyValueConfig train_kv = kv;
  train_kv.set("seed", "0");  // per-run seeds are derived from the sweep seed
  const TrainConfig base = TrainConfig::from(train_kv);

  std::ofstream csv(out);
  if (!csv) throw Error("cannot open file for writing: " + out);
  csv << "method,tau,gamma,imbalance_factor,seed,overall,head,medium,tail,mean_or,fire_rate\n";
  csv.precision(10);
  std::vector<RunSummary> runs;
  try {
    for (auto seed : seeds) {
      const Scenario sc = prepare_scenario(spec, seed);
      for (double tau : taus) {
        for (Method m : kAllMethods) {
          const auto r = run_method(sc, base, m, tau, seed);
          csv << to_string(m) << ',' << tau << ',' << spec.gamma << ',' << spec.imbalance_factor << ',' << seed << ','
              << r.metrics.overall << ',' << r.metrics.groups.head << ',' << r.metrics.groups.medium << ','
              << r.metrics.groups.tail << ',' << r.mean_or << ',' << r.fire_rate << '\n';
          csv.flush();
          spdlog::debug("seed {} tau {} {}: {:.4f}", seed, tau, to_string(m), r.metrics.overall);
          runs.push_back(r);
        }
      }
    }
  } catch (const std::exception& e) {
    csv << "FAILED,,,,,,,,,,\n";
    csv.flush();
    throw;
  }

  if (!summary_out.empty()) {
    std::ofstream sum(summary_out);
    if (!sum) throw Error("cannot open file for writing: " + summary_out);
    sum << "method,tau,runs,mean_overall,std_overall,mean_head,mean_medium,mean_tail\n";
    sum.precision(10);
    for (double tau : taus) {
      for (Method m : kAllMethods) {
        std::vector<double> overall;
        double head = 0, medium = 0, tail = 0;
        for (const auto& r : runs) {
          if (r.method != m || r.tau != tau) continue;
          overall.push_back(r.metrics.overall);
          head += r.metrics.groups.head;
          medium += r.metrics.groups.medium;
          tail += r.metrics.groups.tail;
        }
        const double n = static_cast<double>(overall.size());
        sum << to_string(m) << ',' << tau << ',' << overall.size() << ','
            << std::accumulate(overall.begin(), overall.end(), 0.0) / n << ',' << stddev(overall) << ',' << head / n
            << ',' << medium / n << ',' << tail / n << '\n';
      }
    }
  }
  spdlog::info("wrote {} rows to {}", runs.size(), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak-teacher supervision laboratory for long-tailed noisy-label learning"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic WTSEMB1 embedding dataset");
  s->add_option("--classes", synth.spec.classes, "Number of classes")->default_val(10);
  s->add_option("--dim", synth.spec.dim, "Embedding dimension")->default_val(32);
  s->add_option("--per-class", synth.spec.samples_per_class, "Training samples per class")->default_val(500);
  s->add_option("--spread", synth.spec.cluster_spread, "Gaussian spread around class centroids")->default_val(0.25);
  s->add_option("--teacher-quality", synth.spec.teacher_quality, "Prototype/centroid alignment in (0,1]")
      ->default_val(0.45);
  s->add_option("--seed", synth.spec.seed, "Random seed")->required();
  s->add_option("--out", synth.out, "Output training file")->required();
  s->add_option("--test-out", synth.test_out, "Optional balanced clean test file");
  s->add_option("--test-per-class", synth.test_per_class, "Test samples per class")->default_val(200);

  CorruptArgs corrupt;
  auto* c = app.add_subcommand("corrupt", "Long-tail subsample a dataset and corrupt its labels");
  c->add_option("--in", corrupt.in, "Input WTSEMB1 file")->required();
  c->add_option("--out", corrupt.out, "Output WTSEMB1 file")->required();
  c->add_option("--noise", corrupt.noise, "Noise type")->check(CLI::IsMember({"joint", "symmetric", "asymmetric"}))
      ->required();
  c->add_option("--gamma", corrupt.gamma, "Noise ratio in [0,1)")->required();
  c->add_option("--if", corrupt.imbalance_factor, "Imbalance factor (largest/smallest class)")->default_val(1.0);
  c->add_option("--n-max", corrupt.n_max, "Size of the largest class (default: all of class 0)");
  c->add_option("--seed", corrupt.seed, "Random seed")->required();
  c->add_option("--mapping", corrupt.mapping, "Asymmetric flip mapping")->default_val("cyclic");
  c->add_option("--labels-out", corrupt.labels_out, "Optional text file of (true, observed) label pairs");

  std::string train_config;
  auto* t = app.add_subcommand("train", "Train a probe");
  t->add_option("--config", train_config, "key = value training config")->required();

  std::string probe, data, train_ref, report_out;
  auto* e = app.add_subcommand("eval", "Evaluate a probe checkpoint");
  e->add_option("--probe", probe, "WTSPRB1 checkpoint")->required();
  e->add_option("--data", data, "WTSEMB1 file with true labels")->required();
  e->add_option("--train-data", train_ref, "Training set used to rank head/medium/tail classes");
  e->add_option("--out", report_out, "JSON report path (default: stdout)");

  auto* te = app.add_subcommand("teacher-eval", "Zero-shot accuracy of the frozen text prototypes");
  te->add_option("--data", data, "WTSEMB1 file with true labels")->required();
  te->add_option("--train-data", train_ref, "Training set used to rank head/medium/tail classes");
  te->add_option("--out", report_out, "JSON report path (default: stdout)");

  bool corrupt_gradient = false;
  auto* ch = app.add_subcommand("check", "Run the loss-identity oracle suite");
  ch->add_flag("--corrupt-gradient", corrupt_gradient, "Test hook: perturb analytic gradients");

  std::string sweep_config, sweep_out, sweep_summary;
  auto* sw = app.add_subcommand("sweep", "Run CE, CE+WTS, LA, LA+WTS over seeds and taus");
  sw->add_option("--config", sweep_config, "key = value sweep config")->required();
  sw->add_option("--out", sweep_out, "Per-run CSV output")->required();
  sw->add_option("--summary", sweep_summary, "Optional per-(method, tau) mean/stddev CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    configure_logging();
    if (*s) cmd_synth(synth);
    else if (*c) cmd_corrupt(corrupt);
    else if (*t) cmd_train(train_config);
    else if (*e) cmd_eval(probe, data, train_ref, report_out);
    else if (*te) cmd_teacher_eval(data, train_ref, report_out);
    else if (*ch) return cmd_check(corrupt_gradient);
    else if (*sw) return cmd_sweep(sweep_config, sweep_out, sweep_summary);
    return 0;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
}
