// Copyright 2026 The ssmd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "config.hpp"
#include "ssmd/checkpoint.hpp"
#include "ssmd/corpus.hpp"
#include "ssmd/eval.hpp"
#include "ssmd/likelihood.hpp"
#include "ssmd/sampler.hpp"
#include "ssmd/train.hpp"

namespace ssmd::cli {
namespace {

// Stream ids for the independent random streams a command draws from.
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kLexiconStream = 0x6c657869;
constexpr std::uint64_t kCorpusStream = 0x636f7270;
constexpr std::uint64_t kTabularStream = 0x74616275;
constexpr std::uint64_t kElboStream = 0x656c626f;

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out_dir;
  int threads = 0;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_file, "config file (section.key = value)");
  sub->add_option("-s,--set", c.overrides, "override a config key: key=value")->take_all();
  sub->add_option("-o,--out-dir", c.out_dir, "output directory (paths.out_dir)");
  sub->add_option("-t,--threads", c.threads, "worker thread cap (0 = all cores)")
      ->check(CLI::NonNegativeNumber);
}

Config resolve(const Common& c) {
  Config cfg;
  if (!c.config_file.empty()) cfg.load_file(c.config_file);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  if (!c.out_dir.empty()) cfg.set("paths.out_dir", c.out_dir);
  return cfg;
}

int thread_count(const Common& c) {
  if (c.threads > 0) return c.threads;
  return static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
}

/// Runs `f`, reporting core argument errors as configuration errors.
template <class F>
auto as_config(F&& f) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

std::filesystem::path prepare_out_dir(const Config& cfg) {
  const auto dir = cfg.require("paths.out_dir");
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / "config.resolved.ini");
  os << "# config_hash=" << cfg.hash() << '\n' << cfg.resolved();
  return dir;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string hex_hash(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

SequenceSpec spec_from(const Config& cfg) {
  return as_config([&] {
    return SequenceSpec(static_cast<int>(cfg.integer("spec.S")), static_cast<int>(cfg.integer("spec.D")));
  });
}

HybridConfig hybrid_from(const Config& cfg) {
  HybridConfig h;
  h.alphabet_size = static_cast<int>(cfg.integer("spec.S"));
  h.length = static_cast<int>(cfg.integer("spec.D"));
  h.hidden = static_cast<int>(cfg.integer("model.hidden"));
  h.heads = static_cast<int>(cfg.integer("model.heads"));
  h.nc_blocks = static_cast<int>(cfg.integer("model.nc_blocks"));
  h.c_blocks = static_cast<int>(cfg.integer("model.c_blocks"));
  h.mlp_mult = static_cast<int>(cfg.integer("model.mlp_mult"));
  as_config([&] { h.validate(); });
  return h;
}

TrainConfig train_from(const Config& cfg) {
  TrainConfig t;
  t.steps = static_cast<int>(cfg.integer("train.steps"));
  t.batch_size = static_cast<int>(cfg.integer("train.batch_size"));
  t.warmup = static_cast<int>(cfg.integer("train.warmup"));
  t.peak_lr = cfg.real("train.peak_lr");
  t.final_lr_ratio = cfg.real("train.final_lr_ratio");
  t.weight_decay = cfg.real("train.weight_decay");
  t.grad_clip = cfg.real("train.grad_clip");
  t.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  t.eval_every = static_cast<int>(cfg.integer("train.eval_every"));
  t.eval_sequences = static_cast<int>(cfg.integer("train.eval_sequences"));
  t.freeze_noncausal = cfg.boolean("train.freeze_noncausal");
  as_config([&] {
    t.schedule.kind = parse_schedule_kind(cfg.str("schedule.kind"));
    t.validate();
  });
  return t;
}

/// "cosine[:dtau]", "linear" or "constant[:cap]".
WindowSpec parse_window_flag(const std::string& s, int length) {
  const auto colon = s.find(':');
  const std::string kind = s.substr(0, colon);
  const std::string arg = colon == std::string::npos ? std::string{} : s.substr(colon + 1);
  Config probe;
  WindowSpec w;
  as_config([&] { w.kind = parse_window_kind(kind); });
  if (w.kind == WindowKind::kCosine && !arg.empty()) {
    probe.set("window.dtau", arg);
    w.dtau = probe.real("window.dtau");
  } else if (w.kind == WindowKind::kConstant) {
    if (arg.empty() || arg == "D") {
      w.cap = length;
    } else {
      probe.set("window.cap", arg);
      w.cap = static_cast<int>(probe.integer("window.cap"));
    }
  } else if (!arg.empty()) {
    throw ConfigError("window '" + s + "' takes no parameter");
  }
  as_config([&] { w.validate(); });
  return w;
}

SamplerConfig sampler_from(const Config& cfg, int length) {
  SamplerConfig s;
  as_config([&] {
    s.window.kind = parse_window_kind(cfg.str("window.kind"));
    s.window.dtau = cfg.real("window.dtau");
    const long cap = cfg.integer("window.cap");
    s.window.cap = cap == 0 ? length : static_cast<int>(cap);
    s.inner_loops = static_cast<int>(cfg.integer("sampler.inner_loops"));
    s.grid.steps = static_cast<int>(cfg.integer("sampler.grid_steps"));
    s.schedule.kind = parse_schedule_kind(cfg.str("schedule.kind"));
    s.validate();
  });
  return s;
}

SamplerFamily family_from(const std::string& s) {
  return as_config([&] { return parse_sampler_family(s); });
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string resume;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  Config cfg = resolve(a.common);
  if (!a.resume.empty()) cfg.set("paths.resume", a.resume);
  const auto corpus_path = cfg.require_existing("paths.corpus");
  const bool resuming = cfg.is_set("paths.resume");
  if (resuming) cfg.require_existing("paths.resume");
  const HybridConfig hc = hybrid_from(cfg);
  const TrainConfig tc = train_from(cfg);
  const SequenceSpec spec = spec_from(cfg);
  SequenceFileOptions fopts;
  fopts.char_mode = cfg.boolean("train.char_mode");
  const auto dir = prepare_out_dir(cfg);

  retain_heap_memory();
  auto corpus = read_sequences(corpus_path, spec, fopts);
  if (corpus.empty()) throw InvalidArgument("corpus " + corpus_path.string() + " has no sequences");
  auto [train_set, eval_set] = split_corpus(std::move(corpus), static_cast<int>(cfg.integer("train.held_out")));

  auto make_trainer = [&]() {
    if (resuming) return Trainer::resume(cfg.path("paths.resume"), tc, train_set, eval_set);
    RandomStream rng(tc.seed, kInitStream);
    HybridParams::InitOptions init;
    init.stddev = cfg.real("model.init_std");
    return Trainer(HybridModel(hc, HybridParams::init(hc, rng, init)), tc, train_set, eval_set);
  };
  Trainer trainer = make_trainer();

  std::ofstream csv(dir / "loss.csv");
  csv << "# config_hash=" << cfg.hash() << '\n' << "step,noncausal,causal,total\n";
  const long checkpoint_every = cfg.integer("train.checkpoint_every");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be non-negative");
  auto report = [&](const LossReport& r) {
    if (checkpoint_every > 0 && r.step > 0 && r.step < tc.steps && r.step % checkpoint_every == 0) {
      trainer.save(dir / ("model.step" + std::to_string(r.step) + ".ssmd"));
    }
    csv << r.step << ',' << fmt(r.noncausal) << ',' << fmt(r.causal) << ',' << fmt(r.total()) << '\n';
    csv.flush();
    out << "step " << r.step << "  noncausal " << std::fixed << std::setprecision(4) << r.noncausal
        << "  causal " << r.causal << "  gap " << r.noncausal - r.causal << '\n'
        << std::defaultfloat;
  };
  if (trainer.step() == 0) report(trainer.evaluate());
  trainer.run(report);

  const auto ckpt = cfg.is_set("paths.checkpoint") ? cfg.path("paths.checkpoint") : dir / "model.ssmd";
  trainer.save(ckpt);
  out << "saved " << ckpt.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
  Common common;
  std::string family;
  int n = -1;
  int inner_loops = 0;
  std::string window;
};

int cmd_sample(const SampleArgs& a, std::ostream& out) {
  Config cfg = resolve(a.common);
  if (!a.family.empty()) cfg.set("sampler.family", a.family);
  if (a.n >= 0) cfg.set("sampler.n", std::to_string(a.n));
  if (a.inner_loops > 0) cfg.set("sampler.inner_loops", std::to_string(a.inner_loops));
  const auto ckpt = cfg.require_existing("paths.checkpoint");
  if (cfg.is_set("paths.lexicon")) cfg.require_existing("paths.lexicon");
  const SamplerFamily family = family_from(cfg.str("sampler.family"));
  const long n = cfg.integer("sampler.n");
  if (n < 0) throw ConfigError("sampler.n must be non-negative");
  const auto dir = prepare_out_dir(cfg);

  const auto model = load_model(ckpt);
  const int d = model->spec().length();
  SamplerConfig sc = sampler_from(cfg, d);
  if (!a.window.empty()) sc.window = parse_window_flag(a.window, d);

  const auto results = sample_many(*model, family, sc, static_cast<std::uint64_t>(cfg.integer("seed")),
                                   static_cast<int>(n), thread_count(a.common));
  std::vector<std::vector<Token>> seqs;
  for (const auto& r : results) seqs.emplace_back(r.sequence.tokens().begin(), r.sequence.tokens().end());
  write_sequences(dir / "samples.txt", seqs);

  std::ofstream csv(dir / "samples.csv");
  csv << "# config_hash=" << cfg.hash() << '\n'
      << "index,seed,ordering_hash,nfe,rejections,length,noncausal_passes,causal_passes,"
         "outer_iterations,entropy\n";
  double nfe = 0.0;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& r = results[k];
    csv << k << ',' << r.stream_id << ',' << hex_hash(r.ordering.hash()) << ',' << fmt(r.nfe()) << ','
        << r.rejections() << ',' << r.sequence.size() << ',' << r.meter.noncausal_passes() << ','
        << r.meter.causal_passes() << ',' << r.outer_iterations << ','
        << fmt(sample_entropy(r.sequence.tokens())) << '\n';
    nfe += r.nfe();
  }
  out << "wrote " << results.size() << " samples to " << (dir / "samples.txt").string() << '\n';
  if (!results.empty()) {
    out << "mean NFE " << nfe / static_cast<double>(results.size()) << '\n';
    if (cfg.is_set("paths.lexicon")) {
      const Lexicon lex = read_lexicon(cfg.path("paths.lexicon"));
      long valid = 0;
      long total = 0;
      const Token sep = model->spec().alphabet_size() - 1;
      for (const auto& s : seqs) {
        for (const Word& w : interior_words(s, sep)) {
          ++total;
          if (lex.contains(w)) ++valid;
        }
      }
      if (total > 0) out << "lexicon accuracy " << static_cast<double>(valid) / total << '\n';
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- likelihood

struct LikelihoodArgs {
  Common common;
  std::string input;
  bool exact_orderings = false;
};

int cmd_likelihood(const LikelihoodArgs& a, std::ostream& out) {
  Config cfg = resolve(a.common);
  if (a.exact_orderings) cfg.set("likelihood.exact_orderings", "true");
  const auto ckpt = cfg.require_existing("paths.checkpoint");
  if (!std::filesystem::exists(a.input)) throw ConfigError("input file not found: " + a.input);
  const bool exact = cfg.boolean("likelihood.exact_orderings");
  const long orderings = cfg.integer("likelihood.orderings");
  if (orderings < 1) throw ConfigError("likelihood.orderings must be >= 1");
  const auto dir = prepare_out_dir(cfg);

  const auto model = load_model(ckpt);
  const SequenceSpec& spec = model->spec();
  if (exact && spec.length() > 8) throw ConfigError("exact ordering enumeration needs D <= 8");
  const auto seqs = read_sequences(a.input, spec);
  const Ordering identity = Ordering::identity(spec.length());
  const RandomStream root(static_cast<std::uint64_t>(cfg.integer("seed")), kElboStream);

  std::ofstream csv(dir / "likelihood.csv");
  csv << "# config_hash=" << cfg.hash() << '\n'
      << (exact ? "# logp: log of the ordering-averaged likelihood; elbo: exact mean over orderings\n"
                : "# logp: identity ordering; elbo: Monte Carlo mean over sampled orderings\n")
      << "sequence_index,ordering_hash,logp,elbo,elbo_se,expected_rejections,"
         "expected_outer_iterations\n";
  for (std::size_t k = 0; k < seqs.size(); ++k) {
    const TokenSequence x(spec, seqs[k]);
    const RunTables tables(*model, x, identity);
    double logp = 0.0;
    double elbo_mean = 0.0;
    double elbo_se = 0.0;
    if (exact) {
      const OrderingEnumeration e = enumerate_orderings(*model, x);
      logp = e.log_marginal;
      elbo_mean = e.elbo;
    } else {
      logp = sequence_likelihood(tables);
      RandomStream rng = root.split(k);
      const ElboEstimate e = elbo(*model, x, static_cast<int>(orderings), rng);
      elbo_mean = e.mean;
      elbo_se = e.std_error;
    }
    std::string en = "nan";
    std::string eo = "nan";
    if (std::isfinite(sequence_likelihood(tables))) {
      const RejectionPosterior post = rejection_count_posterior(tables);
      en = fmt(post.mean());
      eo = fmt(post.expected_outer_iterations());
    }
    csv << k << ',' << hex_hash(identity.hash()) << ',' << fmt(logp) << ',' << fmt(elbo_mean) << ',' << fmt(elbo_se) << ',' << en << ','
        << eo << '\n';
  }
  out << "scored " << seqs.size() << " sequences into " << (dir / "likelihood.csv").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  Common common;
  std::string grid;
};

/// "key=v1,v2;key=..." over the sweep.* keys.
void apply_sweep_spec(Config& cfg, const std::string& spec) {
  std::istringstream is(spec);
  std::string part;
  bool any = false;
  while (std::getline(is, part, ';')) {
    if (part.find_first_not_of(" \t") == std::string::npos) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("sweep spec item '" + part + "' is not key=values");
    std::string key = part.substr(0, eq);
    key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
    if (key.empty() || !Config::schema().count("sweep." + key)) {
      throw ConfigError("unknown sweep spec key '" + key + "'");
    }
    cfg.set("sweep." + key, part.substr(eq + 1));
    any = true;
  }
  if (!any) throw ConfigError("empty sweep spec");
}

std::string label_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::vector<SweepEntry> sweep_entries(const Config& cfg, int length) {
  const SamplerConfig base = sampler_from(cfg, length);
  std::vector<SweepEntry> entries;
  std::istringstream fam(cfg.str("sweep.families"));
  std::string f;
  while (std::getline(fam, f, ',')) {
    f.erase(std::remove_if(f.begin(), f.end(), ::isspace), f.end());
    if (f.empty()) continue;
    const SamplerFamily family = family_from(f);
    if (family == SamplerFamily::kMdm) {
      for (long t : cfg.int_list("sweep.grid_steps")) {
        if (t < 1) throw ConfigError("sweep.grid_steps entries must be >= 1");
        SamplerConfig sc = base;
        sc.grid.steps = static_cast<int>(t);
        entries.push_back({family, sc, "T" + std::to_string(t)});
      }
    } else if (family == SamplerFamily::kSpecBasic) {
      entries.push_back({family, base, "basic"});
    } else {
      for (long loops : cfg.int_list("sweep.inner_loops")) {
        if (loops < 1) throw ConfigError("sweep.inner_loops entries must be >= 1");
        for (double dtau : cfg.real_list("sweep.dtau")) {
          SamplerConfig sc = base;
          sc.window = WindowSpec::cosine(dtau);
          sc.inner_loops = static_cast<int>(loops);
          as_config([&] { sc.validate(); });
          entries.push_back({family, sc, "cos" + label_number(dtau) + "_N" + std::to_string(loops)});
        }
        if (cfg.boolean("sweep.linear_window")) {
          SamplerConfig sc = base;
          sc.window = WindowSpec::linear();
          sc.inner_loops = static_cast<int>(loops);
          entries.push_back({family, sc, "lin_N" + std::to_string(loops)});
        }
      }
    }
  }
  if (entries.empty()) throw ConfigError("sweep has no configurations");
  return entries;
}

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  Config cfg = resolve(a.common);
  if (!a.grid.empty()) apply_sweep_spec(cfg, a.grid);
  const auto ckpt = cfg.require_existing("paths.checkpoint");
  if (cfg.is_set("paths.lexicon")) cfg.require_existing("paths.lexicon");
  const long n = cfg.integer("sweep.n_samples");
  if (n < 1) throw ConfigError("sweep.n_samples must be >= 1");

  const auto model = load_model(ckpt);
  const int d = model->spec().length();
  const std::vector<SweepEntry> entries = sweep_entries(cfg, d);
  const auto dir = prepare_out_dir(cfg);

  SweepMetrics metrics;
  const Token sep = model->spec().alphabet_size() - 1;
  std::optional<Lexicon> lexicon;
  std::optional<LexiconOracle> lex_oracle;
  if (cfg.is_set("paths.lexicon")) {
    lexicon = read_lexicon(cfg.path("paths.lexicon"));
    metrics.lexicon = &*lexicon;
    metrics.separator = sep;
  }
  if (const auto* tab = dynamic_cast<const TabularModel*>(model.get())) {
    metrics.oracle = [tab](std::span<const Token> s) {
      const double p = tab->probability(s);
      return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    };
  } else if (lexicon) {
    lex_oracle.emplace(*lexicon, sep);
    metrics.oracle = [&lex_oracle](std::span<const Token> s) { return lex_oracle->log_prob(s); };
  }

  const auto points = tradeoff_sweep(*model, entries, static_cast<int>(n),
                                     static_cast<std::uint64_t>(cfg.integer("seed")), metrics,
                                     thread_count(a.common));
  {
    std::ofstream csv(dir / "tradeoff.csv");
    write_tradeoff_csv(csv, points, cfg.hash());
    std::ofstream curves(dir / "curves.csv");
    write_plot_data(curves, points, cfg.hash());
  }
  for (const auto& p : points) {
    out << std::left << std::setw(10) << p.family << std::setw(14) << p.label << " nfe "
        << std::fixed << std::setprecision(3) << p.mean_nfe << "  lexicon " << p.lexicon_acc
        << "  entropy " << p.entropy << "  oracle_nll " << p.oracle_nll << '\n'
        << std::defaultfloat;
  }
  out << "wrote " << (dir / "tradeoff.csv").string() << " and " << (dir / "curves.csv").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- generators

int cmd_make_corpus(const Common& c, std::ostream& out) {
  const Config cfg = resolve(c);
  const auto corpus_path = cfg.require("paths.corpus");
  const auto lexicon_path = cfg.require("paths.lexicon");
  LexiconSpec ls;
  ls.alphabet_size = static_cast<int>(cfg.integer("spec.S"));
  ls.num_words = static_cast<int>(cfg.integer("corpus.num_words"));
  ls.min_length = static_cast<int>(cfg.integer("corpus.min_word"));
  ls.max_length = static_cast<int>(cfg.integer("corpus.max_word"));
  as_config([&] { ls.validate(); });
  const int d = spec_from(cfg).length();
  const long n = cfg.integer("corpus.sequences");
  if (n < 0) throw ConfigError("corpus.sequences must be non-negative");

  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  RandomStream lex_rng(seed, kLexiconStream);
  const Lexicon lex = generate_lexicon(ls, lex_rng);
  RandomStream corpus_rng(seed, kCorpusStream);
  const auto corpus = generate_lexicon_corpus(lex, ls.separator(), d, static_cast<int>(n), corpus_rng);
  for (const auto& p : {corpus_path, lexicon_path}) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  }
  write_lexicon(lexicon_path, lex);
  write_sequences(corpus_path, corpus);
  out << "wrote " << lex.size() << " words to " << lexicon_path.string() << " and " << n
      << " sequences to " << corpus_path.string() << '\n';
  return kExitOk;
}

int cmd_make_tabular(const Common& c, std::ostream& out) {
  const Config cfg = resolve(c);
  const auto path = cfg.require("paths.checkpoint");
  const SequenceSpec spec = spec_from(cfg);
  TabularOptions opts;
  opts.draft_epsilon = cfg.real("tabular.draft_epsilon");
  opts.target_shift = cfg.real("tabular.target_shift");
  opts.first_slot_fallback = cfg.boolean("tabular.first_slot_fallback");
  opts.blocks = {static_cast<int>(cfg.integer("tabular.nc_blocks")),
                 static_cast<int>(cfg.integer("tabular.c_blocks"))};
  RandomStream rng(static_cast<std::uint64_t>(cfg.integer("seed")), kTabularStream);
  const TabularModel model = as_config(
      [&] { return TabularModel::random(spec, rng, opts, cfg.real("tabular.concentration")); });
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  save_tabular(path, model, describe_model_json(model));
  out << "wrote tabular model (S=" << spec.alphabet_size() << ", D=" << spec.length() << ") to "
      << path.string() << '\n';
  return kExitOk;
}

int cmd_config(const Common& c, std::ostream& out) {
  const Config cfg = resolve(c);
  out << "# config_hash=" << cfg.hash() << '\n' << cfg.resolved();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Draft-and-verify sampling for masked diffusion: training, sampling, likelihoods and sweeps", "ssmd"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a hybrid model on a corpus");
  add_common(train_cmd, train.common);
  train_cmd->add_option("--resume", train.resume, "checkpoint to resume (paths.resume)");

  SampleArgs sample;
  auto* sample_cmd = app.add_subcommand("sample", "draw sequences from a checkpoint");
  add_common(sample_cmd, sample.common);
  sample_cmd->add_option("-f,--family", sample.family, "mdm | spec | spec-basic");
  sample_cmd->add_option("-n,--n", sample.n, "number of sequences")->check(CLI::NonNegativeNumber);
  sample_cmd->add_option("--inner-loops,--inner_loops", sample.inner_loops, "draft-verify loops")
      ->check(CLI::PositiveNumber);
  sample_cmd->add_option("-w,--window", sample.window, "cosine[:dtau] | linear | constant[:cap|D]");

  LikelihoodArgs lik;
  auto* lik_cmd = app.add_subcommand("likelihood", "exact log-likelihoods, ELBO and rejection counts");
  add_common(lik_cmd, lik.common);
  lik_cmd->add_option("-i,--input", lik.input, "sequence file")->required();
  lik_cmd->add_flag("--exact-orderings", lik.exact_orderings, "enumerate all orderings (D <= 8)");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "NFE versus quality tradeoff sweep");
  add_common(sweep_cmd, sweep.common);
  sweep_cmd->add_option("-g,--grid", sweep.grid,
                        "sweep spec, e.g. 'dtau=0.05,0.1;inner_loops=1,2;grid_steps=4,8'");

  Common selftest;
  auto* selftest_cmd = app.add_subcommand("selftest", "run the invariant checks");
  add_common(selftest_cmd, selftest);

  Common corpus;
  auto* corpus_cmd = app.add_subcommand("make-corpus", "generate a lexicon and a corpus of windows");
  add_common(corpus_cmd, corpus);

  Common tabular;
  auto* tabular_cmd = app.add_subcommand("make-tabular", "write a random tabular model checkpoint");
  add_common(tabular_cmd, tabular);

  Common show;
  auto* config_cmd = app.add_subcommand("config", "print the resolved configuration");
  add_common(config_cmd, show);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train, out);
    if (sample_cmd->parsed()) return cmd_sample(sample, out);
    if (lik_cmd->parsed()) return cmd_likelihood(lik, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep, out);
    if (corpus_cmd->parsed()) return cmd_make_corpus(corpus, out);
    if (tabular_cmd->parsed()) return cmd_make_tabular(tabular, out);
    if (config_cmd->parsed()) return cmd_config(show, out);
    if (selftest_cmd->parsed()) {
      resolve(selftest);
      return run_selftest(out) == 0 ? kExitOk : kExitRuntime;
    }
  } catch (const ConfigError& e) {
    err << "ssmd: configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "ssmd: error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace ssmd::cli
