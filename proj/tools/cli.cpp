#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "saekit/activation_store.hpp"
#include "saekit/checkpoint.hpp"
#include "saekit/features.hpp"
#include "saekit/metrics.hpp"
#include "saekit/records.hpp"
#include "saekit/selection.hpp"
#include "saekit/synth.hpp"
#include "saekit/train.hpp"

namespace saekit::cli {

namespace {

namespace fs = std::filesystem;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainArgs {
  std::vector<std::string> shards;
  std::string checkpoint = "sae.saep";
  std::string loss_csv = "loss.csv";
  std::string variant = "topk";
  std::size_t k = 128;
  std::size_t latents = 1024;
  std::size_t dim = 64;
  double lr = 7e-5;
  double warmup_ratio = 0.5;
  std::size_t epochs = 4;
  std::size_t batch_size = 4096;
  double aux_coef = 1.0 / 32.0;
  std::uint64_t dead_tokens = 10'000'000;
  std::size_t k_aux = 0;
  std::size_t steps = 0;
  std::size_t grad_acc_steps = 4;
  std::size_t micro_acc_steps = 2;
  bool normalize_inputs = false;
  bool learn_pre_bias = true;
  std::size_t log_every = 100;
};

struct ExtractArgs {
  std::string checkpoint = "sae.saep";
  std::string shard;
  std::string out = "features.tsv";
  double threshold = 10.0;
  std::string scope = "both";
  std::vector<double> sweep;
  std::string sweep_out = "sweep.csv";
};

struct SelectArgs {
  std::string records;
  std::string features;
  std::string out = "selected.txt";
  std::string report = "report.csv";
  std::string mode = "greedy";
  std::size_t n = 1000;
  double sim_ratio = 0.8;
  std::string length_metric = "chars";
};

struct StatsArgs {
  std::string records;
  std::string features;
  std::string report;
  std::string summary = "stats_summary.txt";
  std::string table = "length_counts.csv";
  std::string coverage = "coverage.csv";
  std::string length_metric = "chars";
  std::string scope = "both";
};

struct SynthArgs {
  std::string out_shard = "synth.saes";
  std::string out_records = "records.jsonl";
  std::string out_ledger = "ground_truth.tsv";
  std::string out_dict = "dictionary.saes";
  std::size_t dim = 64;
  std::size_t atoms = 256;
  std::size_t k_active = 4;
  std::size_t samples = 1000;
  std::size_t min_tokens = 1;
  std::size_t max_tokens = 32;
  double noise = 0.01;
};

struct Args {
  std::uint64_t seed = 0;
  TrainArgs train;
  ExtractArgs extract;
  SelectArgs select;
  StatsArgs stats;
  SynthArgs synth;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Reads a flat key=value file into `--key=value` tokens.
std::vector<std::string> config_tokens(const std::string& path, const CLI::App& sub) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key == "config" || key == "help" || sub.get_option_no_throw("--" + key) == nullptr)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown config key '" + key + "' for '" +
                        sub.get_name() + "'");
    tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

void add_common(CLI::App& sub, Args& a) {
  sub.add_option("--config", "Flat key=value file; keys are flag names without dashes");
  sub.add_option("--seed", a.seed, "Seed for every randomized step");
}

void build(CLI::App& app, Args& a) {
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* train = app.add_subcommand("train", "Train a sparse autoencoder on activation shards");
  add_common(*train, a);
  auto& t = a.train;
  train->add_option("--shards", t.shards, "Input shard files")->required()->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  train->add_option("--checkpoint", t.checkpoint, "Output checkpoint");
  train->add_option("--loss-csv", t.loss_csv, "Per-step loss history");
  train->add_option("--variant", t.variant, "Encoder variant")->check(CLI::IsMember({"topk", "relu"}));
  train->add_option("--k", t.k, "Latents kept per token")->check(CLI::PositiveNumber);
  train->add_option("--latents", t.latents, "Latent count n")->check(CLI::PositiveNumber);
  train->add_option("--dim", t.dim, "Activation dimension d")->check(CLI::PositiveNumber);
  train->add_option("--lr", t.lr, "Peak learning rate")->check(CLI::PositiveNumber);
  train->add_option("--warmup-ratio", t.warmup_ratio, "Fraction of steps spent ramping the learning rate")
      ->check(CLI::Range(0.0, 1.0));
  train->add_option("--epochs", t.epochs, "Passes over the data")->check(CLI::PositiveNumber);
  train->add_option("--batch-size", t.batch_size, "Rows per optimizer step")->check(CLI::PositiveNumber);
  train->add_option("--aux-coef", t.aux_coef, "Dead-latent auxiliary loss weight")->check(CLI::NonNegativeNumber);
  train->add_option("--dead-tokens", t.dead_tokens, "Tokens without firing before a latent counts as dead")
      ->check(CLI::PositiveNumber);
  train->add_option("--k-aux", t.k_aux, "Dead latents used by the auxiliary loss (0 = 2k)");
  train->add_option("--steps", t.steps, "Stop after this many steps (0 = epochs x batches)");
  train->add_option("--grad-acc-steps", t.grad_acc_steps, "Gradient accumulation chunks per step")
      ->check(CLI::PositiveNumber);
  train->add_option("--micro-acc-steps", t.micro_acc_steps, "Micro-batches per accumulation chunk")
      ->check(CLI::PositiveNumber);
  train->add_option("--normalize-inputs", t.normalize_inputs, "Scale input rows to unit norm");
  train->add_option("--learn-pre-bias", t.learn_pre_bias, "Train the pre-encoder bias");
  train->add_option("--log-every", t.log_every, "Progress line interval in steps (0 = silent)");

  auto* extract = app.add_subcommand("extract", "Compute per-sample activated feature sets");
  add_common(*extract, a);
  auto& e = a.extract;
  extract->add_option("--checkpoint", e.checkpoint, "SAE checkpoint");
  extract->add_option("--shard", e.shard, "Activation shard")->required();
  extract->add_option("--out", e.out, "Feature set file");
  extract->add_option("--threshold", e.threshold, "Inference (JumpReLU) threshold")->check(CLI::NonNegativeNumber);
  extract->add_option("--scope", e.scope, "Text the shard activations cover")
      ->check(CLI::IsMember({"instruction", "both"}));
  extract->add_option("--sweep", e.sweep, "Extra thresholds to summarize")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->delimiter(',');
  extract->add_option("--sweep-out", e.sweep_out, "Threshold sweep CSV (written when --sweep is given)");

  auto* select = app.add_subcommand("select", "Select a diverse subset of records");
  add_common(*select, a);
  auto& s = a.select;
  select->add_option("--records", s.records, "Records (JSON Lines)")->required();
  select->add_option("--features", s.features, "Feature set file")->required();
  select->add_option("--out", s.out, "Selected ids, one per line");
  select->add_option("--report", s.report, "Per-acceptance report CSV");
  select->add_option("--mode", s.mode, "Selection rule")->check(CLI::IsMember({"greedy", "simscale"}));
  select->add_option("--n", s.n, "Target subset size")->check(CLI::PositiveNumber);
  select->add_option("--sim-ratio", s.sim_ratio, "Overlap ratio bound for simscale")->check(CLI::NonNegativeNumber);
  select->add_option("--length-metric", s.length_metric, "Instruction length unit used for ordering")
      ->check(CLI::IsMember({"chars", "tokens"}));

  auto* stats = app.add_subcommand("stats", "Length/feature-count correlation and coverage curve");
  add_common(*stats, a);
  auto& st = a.stats;
  stats->add_option("--records", st.records, "Records (JSON Lines)")->required();
  stats->add_option("--features", st.features, "Feature set file")->required();
  stats->add_option("--report", st.report, "Selection report CSV for the coverage curve");
  stats->add_option("--summary", st.summary, "Correlation summary output");
  stats->add_option("--table", st.table, "Per-record length/count CSV");
  stats->add_option("--coverage", st.coverage, "Coverage curve CSV (needs --report)");
  stats->add_option("--length-metric", st.length_metric, "Length unit")->check(CLI::IsMember({"chars", "tokens"}));
  stats->add_option("--scope", st.scope, "Which text is measured")->check(CLI::IsMember({"instruction", "both"}));

  auto* synth = app.add_subcommand("synth", "Generate a synthetic superposition dataset");
  add_common(*synth, a);
  auto& y = a.synth;
  synth->add_option("--out-shard", y.out_shard, "Activation shard output");
  synth->add_option("--out-records", y.out_records, "Aligned records output (JSON Lines)");
  synth->add_option("--out-ledger", y.out_ledger, "Ground-truth atom supports per sample");
  synth->add_option("--out-dict", y.out_dict, "Ground-truth dictionary (one atom per row)");
  synth->add_option("--dim", y.dim, "Activation dimension d")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20));
  synth->add_option("--atoms", y.atoms, "Dictionary size m")->check(CLI::PositiveNumber);
  synth->add_option("--k-active", y.k_active, "Atoms per token")->check(CLI::PositiveNumber);
  synth->add_option("--samples", y.samples, "Number of samples")->check(CLI::PositiveNumber);
  synth->add_option("--min-tokens", y.min_tokens, "Fewest tokens per sample")->check(CLI::PositiveNumber);
  synth->add_option("--max-tokens", y.max_tokens, "Most tokens per sample")->check(CLI::PositiveNumber);
  synth->add_option("--noise", y.noise, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

int cmd_train(const Args& a, std::ostream& err) {
  const auto& t = a.train;
  train::TrainConfig cfg;
  cfg.variant = t.variant == "relu" ? sae::Variant::Relu : sae::Variant::TopK;
  cfg.n = t.latents;
  cfg.d = t.dim;
  cfg.k = t.k;
  cfg.batch_size = t.batch_size;
  cfg.lr = t.lr;
  cfg.warmup_ratio = t.warmup_ratio;
  cfg.epochs = t.epochs;
  cfg.aux_coef = t.aux_coef;
  cfg.dead_token_threshold = t.dead_tokens;
  cfg.k_aux = t.k_aux;
  cfg.seed = a.seed;
  cfg.grad_acc_steps = t.grad_acc_steps;
  cfg.micro_acc_steps = t.micro_acc_steps;
  cfg.max_steps = t.steps;
  cfg.normalize_inputs = t.normalize_inputs;
  cfg.learn_pre_bias = t.learn_pre_bias;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }

  std::vector<store::ActivationShard> shards;
  for (const auto& path : t.shards) {
    shards.push_back(store::read_shard(path));
    if (shards.back().d != cfg.d)
      throw std::runtime_error("shard " + path + " has d=" + std::to_string(shards.back().d) +
                               " but --dim is " + std::to_string(cfg.d));
  }

  const auto progress = [&](const train::StepResult& s, std::size_t total) {
    if (t.log_every == 0) return;
    if ((s.step + 1) % t.log_every == 0 || s.step + 1 == total)
      err << "step " << (s.step + 1) << "/" << total << " loss=" << s.loss << " aux=" << s.aux_loss
          << " lr=" << s.lr << '\n';
  };
  const auto result = train::train(shards, cfg, progress);
  ensure_parent(t.checkpoint);
  ensure_parent(t.loss_csv);
  sae::write_checkpoint(t.checkpoint, result.params);
  train::write_loss_csv(t.loss_csv, result.history);
  err << "wrote " << t.checkpoint << " and " << t.loss_csv << " (" << result.history.size() << " steps)\n";
  return kExitOk;
}

std::string fmt_real(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

int cmd_extract(const Args& a, std::ostream& err) {
  const auto& e = a.extract;
  const auto params = sae::read_checkpoint(e.checkpoint);
  const auto shard = store::read_shard(e.shard);
  if (params.d != shard.d)
    throw std::runtime_error("dimension mismatch: checkpoint d=" + std::to_string(params.d) + ", shard d=" +
                             std::to_string(shard.d));
  const auto sets = features::extract_features(params, shard, e.threshold);
  const std::map<std::string, std::string> header = {
      {"threshold", fmt_real(e.threshold)},
      {"scope", e.scope},
      {"n", std::to_string(params.n)},
      {"d", std::to_string(params.d)},
      {"k", std::to_string(params.k)},
  };
  ensure_parent(e.out);
  features::write_feature_sets(e.out, sets, header);
  err << "threshold=" << fmt_real(e.threshold) << " scope=" << e.scope << " samples=" << sets.size() << " -> "
      << e.out << '\n';

  if (!e.sweep.empty()) {
    ensure_parent(e.sweep_out);
    metrics::write_sweep_csv(e.sweep_out, metrics::threshold_sweep(params, shard, e.sweep));
  }
  return kExitOk;
}

int cmd_select(const Args& a, std::ostream& err) {
  const auto& s = a.select;
  selection::SelectConfig cfg;
  cfg.mode = selection::parse_mode(s.mode);
  cfg.target_n = s.n;
  cfg.sim_threshold = s.sim_ratio;
  cfg.length_metric = records::parse_length_metric(s.length_metric);

  const auto recs = selection::sort_records(records::read_records(s.records), cfg.length_metric);
  const auto feats = features::to_map(features::read_feature_sets(s.features));
  err << "mode=" << s.mode << " n=" << s.n;
  if (cfg.mode == selection::Mode::SimScale) err << " sim_ratio=" << fmt_real(s.sim_ratio);
  err << " length_metric=" << s.length_metric << '\n';

  const auto state = selection::select(recs, feats, cfg);
  const auto report = selection::selection_report(state, feats);
  ensure_parent(s.out);
  ensure_parent(s.report);
  selection::write_selected_ids(s.out, state);
  selection::write_report_csv(s.report, report);
  err << "selected " << state.selected_ids.size() << " records in " << state.pass_count << " pass(es), union "
      << report.total_union << '\n';
  if (state.shortfall > 0)
    err << "warning: shortfall of " << state.shortfall << " records; no further record satisfies the "
        << s.mode << " condition\n";
  return kExitOk;
}

int cmd_stats(const Args& a, std::ostream& err) {
  const auto& st = a.stats;
  const auto recs = records::read_records(st.records);
  const auto feats = features::to_map(features::read_feature_sets(st.features));
  const auto report = metrics::length_activation_report(recs, feats, records::parse_length_metric(st.length_metric),
                                                        records::parse_scope(st.scope));
  ensure_parent(st.summary);
  ensure_parent(st.table);
  {
    std::ofstream out(st.summary, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + st.summary + " for writing");
    out << metrics::format_summary(report);
  }
  metrics::write_length_table_csv(st.table, report);
  if (!st.report.empty()) {
    ensure_parent(st.coverage);
    metrics::write_coverage_csv(st.coverage, metrics::coverage_curve(selection::read_report_csv(st.report)));
  }
  err << "r=" << report.correlation.r << " over " << report.correlation.n_points << " records\n";
  return kExitOk;
}

int cmd_synth(const Args& a, std::ostream& err) {
  const auto& y = a.synth;
  if (y.min_tokens > y.max_tokens) throw ConfigError("--min-tokens exceeds --max-tokens");
  if (y.k_active > y.atoms) throw ConfigError("--k-active exceeds --atoms");

  const auto dict = synth::gen_dictionary(y.atoms, y.dim, a.seed);
  synth::SampleSpec spec;
  spec.k_active = y.k_active;
  spec.num_samples = y.samples;
  spec.min_tokens = y.min_tokens;
  spec.max_tokens = y.max_tokens;
  spec.noise_sigma = y.noise;
  spec.seed = a.seed + 1;
  const auto samples = synth::gen_samples(dict, spec);

  std::vector<std::size_t> token_counts;
  for (std::size_t i = 0; i < samples.shard.num_samples(); ++i)
    token_counts.push_back(samples.shard.sample_end(i) - samples.shard.sample_begin(i));
  const auto recs = synth::records_for_samples(token_counts, a.seed + 2);

  store::ActivationShard dict_shard;
  dict_shard.d = static_cast<std::uint32_t>(dict.d());
  dict_shard.rows = MatrixF(0, dict.d());
  for (std::size_t i = 0; i < dict.m(); ++i) {
    std::vector<float> row(dict.atoms.row(i).begin(), dict.atoms.row(i).end());
    dict_shard.rows.append_row(row);
    dict_shard.sample_offsets.push_back(i + 1);
  }
  dict_shard.meta = {{"source", "synth-dictionary"}, {"seed", std::to_string(a.seed)}};

  std::vector<features::FeatureSet> ledger;
  for (std::size_t i = 0; i < samples.true_supports.size(); ++i)
    ledger.push_back({static_cast<std::int64_t>(i), samples.true_supports[i]});

  for (const auto* p : {&y.out_shard, &y.out_records, &y.out_ledger, &y.out_dict}) ensure_parent(*p);
  store::write_shard(y.out_shard, samples.shard);
  records::write_records(y.out_records, recs);
  features::write_feature_sets(y.out_ledger, ledger, {{"kind", "true_atom_supports"}});
  store::write_shard(y.out_dict, dict_shard);
  err << "synth: " << samples.shard.num_samples() << " samples, " << samples.shard.num_rows() << " tokens, d="
      << dict.d() << ", atoms=" << dict.m() << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Args a;
  CLI::App app{"Sparse-autoencoder feature extraction and diversity-driven data selection", "saekit"};
  build(app, a);

  // Splice `--config FILE` contents in right after the subcommand name so
  // that flags given on the command line (parsed later) take precedence.
  std::vector<std::string> expanded;
  try {
    expanded.push_back(args.empty() ? "saekit" : args[0]);
    const CLI::App* sub = nullptr;
    std::vector<std::string> rest;
    std::string config_path;
    for (std::size_t i = 1; i < args.size(); ++i) {
      const std::string& tok = args[i];
      if (sub == nullptr && tok.rfind("-", 0) != 0) {
        sub = app.get_subcommand_ptr(tok).get();
        expanded.push_back(tok);
        continue;
      }
      if (tok == "--config" && i + 1 < args.size()) {
        config_path = args[++i];
      } else if (tok.rfind("--config=", 0) == 0) {
        config_path = tok.substr(9);
      } else {
        rest.push_back(tok);
      }
    }
    if (!config_path.empty()) {
      if (sub == nullptr) throw ConfigError("--config needs a subcommand");
      const auto key_of = [](const std::string& tok) { return tok.substr(0, tok.find('=')); };
      std::set<std::string> given;
      for (const auto& tok : rest)
        if (tok.rfind("--", 0) == 0) given.insert(key_of(tok));
      for (const auto& tok : config_tokens(config_path, *sub))
        if (!given.contains(key_of(tok))) expanded.push_back(tok);
    }
    expanded.insert(expanded.end(), rest.begin(), rest.end());
  } catch (const CLI::OptionNotFound&) {
    // Unknown subcommand: let the parser report it below.
    expanded = args;
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return kExitConfig;
  }

  std::vector<const char*> argv;
  for (const auto& s : expanded) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return kExitConfig;
  }

  try {
    if (app.got_subcommand("train")) return cmd_train(a, err);
    if (app.got_subcommand("extract")) return cmd_extract(a, err);
    if (app.got_subcommand("select")) return cmd_select(a, err);
    if (app.got_subcommand("stats")) return cmd_stats(a, err);
    if (app.got_subcommand("synth")) return cmd_synth(a, err);
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace saekit::cli
