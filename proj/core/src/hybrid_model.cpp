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

#include "ssmd/hybrid_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ssmd {
namespace {

using ad::Matrix;
using ad::Segment;
using ad::Tape;
using ad::Var;

const char* const kBlockLinears[] = {"qkv", "proj", "fc1", "fc2"};

/// Parameters placed on a tape, addressed by block index.
class Net {
 public:
  Net(Tape& tape, const HybridConfig& cfg, const HybridParams& params, bool grad_noncausal,
      bool grad_causal)
      : tape_(tape), cfg_(cfg), params_(params) {
    vars_.reserve(params.blocks().size());
    for (const ParamBlock& b : params.blocks()) {
      vars_.push_back(tape.leaf(b.value, b.noncausal ? grad_noncausal : grad_causal));
    }
  }

  Var p(const std::string& name) const { return vars_[static_cast<std::size_t>(params_.index_of(name))]; }
  const std::vector<Var>& vars() const noexcept { return vars_; }

  Var linear(Var x, const std::string& prefix) {
    return tape_.add_row(tape_.matmul(x, p(prefix + ".w")), p(prefix + ".b"));
  }
  Var norm(Var x, const std::string& prefix) {
    return tape_.layer_norm(x, p(prefix + ".g"), p(prefix + ".b"));
  }

  Var block(Var x, const std::string& prefix, const std::vector<Segment>& segs, bool causal) {
    Var a = norm(x, prefix + ".ln1");
    Var att = tape_.attention(linear(a, prefix + ".qkv"), segs, cfg_.heads, causal);
    x = tape_.add(x, linear(att, prefix + ".proj"));
    Var m = tape_.gelu(linear(norm(x, prefix + ".ln2"), prefix + ".fc1"));
    return tape_.add(x, linear(m, prefix + ".fc2"));
  }

  void check(Var x, const std::string& where) const {
    if (!tape_.value(x).allFinite()) throw NonFiniteError("non-finite activations after " + where);
  }

  struct NoncausalOut {
    Var hidden;  // final-norm hidden states, one row per (sequence, position)
    Var logits;
  };

  /// inputs: B sequences of D tokens (mask id for masked positions), flattened.
  NoncausalOut noncausal(const std::vector<int>& tokens) {
    const int d = cfg_.length;
    const int batch = static_cast<int>(tokens.size()) / d;
    std::vector<int> pos(tokens.size());
    for (std::size_t k = 0; k < pos.size(); ++k) pos[k] = static_cast<int>(k) % d;
    std::vector<Segment> segs;
    for (int s = 0; s < batch; ++s) segs.push_back({s * d, d});
    Var x = tape_.add(tape_.gather_rows(p("tok_emb"), tokens), tape_.gather_rows(p("pos_emb"), pos));
    for (int b = 0; b < cfg_.nc_blocks; ++b) {
      x = block(x, "nc" + std::to_string(b), segs, false);
      check(x, "non-causal block " + std::to_string(b));
    }
    Var h = norm(x, "ln_f");
    Var logits = linear(h, "out");
    check(logits, "non-causal output head");
    return {h, logits};
  }

  struct Tracks {
    std::vector<int> tokens;
    std::vector<int> cur;       // position of the drafted token
    std::vector<int> next;      // position being predicted
    std::vector<int> hid_cur;   // row in the non-causal hidden matrix
    std::vector<int> hid_next;
    std::vector<Segment> segments;
  };

  Var causal(Var hidden, const Tracks& t) {
    Var x = tape_.add(tape_.gather_rows(p("ctok_emb"), t.tokens),
                      tape_.add(tape_.gather_rows(p("cpos_cur"), t.cur),
                                tape_.gather_rows(p("cpos_next"), t.next)));
    Var both = tape_.concat_cols(tape_.gather_rows(hidden, t.hid_cur), tape_.gather_rows(hidden, t.hid_next));
    x = tape_.add(x, linear(both, "inj"));
    for (int b = 0; b < cfg_.c_blocks; ++b) {
      x = block(x, "c" + std::to_string(b), t.segments, true);
      check(x, "causal block " + std::to_string(b));
    }
    Var logits = linear(norm(x, "cln_f"), "cout");
    check(logits, "causal output head");
    return logits;
  }

 private:
  Tape& tape_;
  const HybridConfig& cfg_;
  const HybridParams& params_;
  std::vector<Var> vars_;
};

class HybridCache final : public HiddenCache {
 public:
  HybridCache(Matrix hidden, Matrix logits) : hidden(std::move(hidden)), logits(std::move(logits)) {}
  Matrix hidden;
  Matrix logits;
};

ProbRow softmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  const double m = z.maxCoeff();
  std::vector<double> p(static_cast<std::size_t>(z.size()));
  double s = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    p[static_cast<std::size_t>(k)] = std::exp(z[k] - m);
    s += p[static_cast<std::size_t>(k)];
  }
  for (double& v : p) v /= s;
  return ProbRow(std::move(p));
}

Matrix normal_matrix(int rows, int cols, double stddev, RandomStream& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = dist(rng);
  return m;
}

/// Shared loss graph for a batch; returns (noncausal, causal) scalar vars.
std::pair<Var, Var> build_loss(Net& net, Tape& tape, const HybridConfig& cfg,
                               std::span<const TrainExample> batch) {
  const int d = cfg.length;
  const Token mask = cfg.alphabet_size;
  const auto nb = static_cast<double>(batch.size());
  std::vector<int> inputs;
  inputs.reserve(batch.size() * static_cast<std::size_t>(d));
  Net::Tracks tracks;
  std::vector<int> rows;
  std::vector<int> targets;
  std::vector<double> weights;
  std::vector<int> causal_rows;  // into [causal logits; zero row]
  std::vector<int> first_rank_slots;

  for (std::size_t e = 0; e < batch.size(); ++e) {
    const TrainExample& ex = batch[e];
    if (static_cast<int>(ex.tokens.size()) != d || ex.ordering.size() != d) {
      throw InvalidArgument("training example length differs from model length");
    }
    const int i = ex.revealed;
    if (i < 0 || i >= d) throw InvalidArgument("training example needs 0 <= revealed < D");
    const int base = static_cast<int>(e) * d;
    std::vector<int> in(static_cast<std::size_t>(d));
    for (int pos = 0; pos < d; ++pos) {
      const Token t = ex.tokens[static_cast<std::size_t>(pos)];
      if (t < 0 || t >= cfg.alphabet_size) throw InvalidArgument("training token outside the alphabet");
      in[static_cast<std::size_t>(pos)] = ex.ordering.rank_of(pos) < i ? t : mask;
    }
    inputs.insert(inputs.end(), in.begin(), in.end());

    const int track_base = static_cast<int>(tracks.tokens.size());
    for (int r = i; r + 1 < d; ++r) {
      const int cur = ex.ordering.at(r);
      const int nxt = ex.ordering.at(r + 1);
      tracks.tokens.push_back(ex.tokens[static_cast<std::size_t>(cur)]);
      tracks.cur.push_back(cur);
      tracks.next.push_back(nxt);
      tracks.hid_cur.push_back(base + cur);
      tracks.hid_next.push_back(base + nxt);
    }
    const int ntracks = static_cast<int>(tracks.tokens.size()) - track_base;
    if (ntracks > 0) tracks.segments.push_back({track_base, ntracks});

    const double w = ex.weight * static_cast<double>(d) / static_cast<double>(d - i) / nb;
    for (int r = i; r < d; ++r) {
      const int pos = ex.ordering.at(r);
      rows.push_back(base + pos);
      targets.push_back(ex.tokens[static_cast<std::size_t>(pos)]);
      weights.push_back(w);
      if (r == i) {
        first_rank_slots.push_back(static_cast<int>(causal_rows.size()));
        causal_rows.push_back(-1);
      } else {
        causal_rows.push_back(track_base + (r - 1 - i));
      }
    }
  }

  const Net::NoncausalOut nc = net.noncausal(inputs);
  Var nc_rows = tape.gather_rows(nc.logits, rows);
  Var nc_loss = tape.weighted_nll(nc_rows, targets, weights);

  // The first masked rank has no causal track; it reads an all-zero row so
  // its target logits equal its draft logits.
  Var zero = tape.leaf(Matrix::Zero(1, cfg.alphabet_size), false);
  Var ext = zero;
  if (!tracks.tokens.empty()) ext = tape.concat_rows(net.causal(nc.hidden, tracks), zero);
  const int zero_row = static_cast<int>(tracks.tokens.size());
  for (int slot : first_rank_slots) causal_rows[static_cast<std::size_t>(slot)] = zero_row;
  Var target_logits = tape.add(nc_rows, tape.gather_rows(ext, causal_rows));
  Var c_loss = tape.weighted_nll(target_logits, std::move(targets), std::move(weights));
  return {nc_loss, c_loss};
}

}  // namespace

void HybridConfig::validate() const {
  if (alphabet_size < 2) throw InvalidArgument("alphabet size must be >= 2");
  if (length < 2) throw InvalidArgument("hybrid model length must be >= 2");
  if (hidden < 1 || heads < 1 || hidden % heads != 0) {
    throw InvalidArgument("hidden width must be a positive multiple of the head count");
  }
  if (nc_blocks < 1) throw InvalidArgument("need at least one non-causal block");
  if (c_blocks < 1) throw InvalidArgument("need at least one causal block");
  if (mlp_mult < 1) throw InvalidArgument("mlp multiplier must be >= 1");
}

HybridParams HybridParams::init(const HybridConfig& cfg, RandomStream& rng, InitOptions opts) {
  cfg.validate();
  const int h = cfg.hidden;
  const int s = cfg.alphabet_size;
  const int d = cfg.length;
  const double sd = opts.stddev;
  HybridParams p;
  auto block = [&](const std::string& prefix, bool nc) {
    const std::array<std::pair<int, int>, 4> shapes = {
        std::pair{h, 3 * h}, std::pair{h, h}, std::pair{h, cfg.mlp_mult * h},
        std::pair{cfg.mlp_mult * h, h}};
    p.add(prefix + ".ln1.g", Matrix::Ones(1, h), nc);
    p.add(prefix + ".ln1.b", Matrix::Zero(1, h), nc);
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      const std::string name = prefix + "." + kBlockLinears[k];
      if (k == 2) {
        p.add(prefix + ".ln2.g", Matrix::Ones(1, h), nc);
        p.add(prefix + ".ln2.b", Matrix::Zero(1, h), nc);
      }
      p.add(name + ".w", normal_matrix(shapes[k].first, shapes[k].second, sd, rng), nc);
      p.add(name + ".b", Matrix::Zero(1, shapes[k].second), nc);
    }
  };

  p.add("tok_emb", normal_matrix(s + 1, h, sd, rng), true);
  p.add("pos_emb", normal_matrix(d, h, sd, rng), true);
  for (int b = 0; b < cfg.nc_blocks; ++b) block("nc" + std::to_string(b), true);
  p.add("ln_f.g", Matrix::Ones(1, h), true);
  p.add("ln_f.b", Matrix::Zero(1, h), true);
  p.add("out.w", normal_matrix(h, s, sd, rng), true);
  p.add("out.b", Matrix::Zero(1, s), true);

  p.add("ctok_emb", normal_matrix(s, h, sd, rng), false);
  p.add("cpos_cur", normal_matrix(d, h, sd, rng), false);
  p.add("cpos_next", normal_matrix(d, h, sd, rng), false);
  p.add("inj.w", normal_matrix(2 * h, h, sd, rng), false);
  p.add("inj.b", Matrix::Zero(1, h), false);
  for (int b = 0; b < cfg.c_blocks; ++b) block("c" + std::to_string(b), false);
  p.add("cln_f.g", Matrix::Ones(1, h), false);
  p.add("cln_f.b", Matrix::Zero(1, h), false);
  if (opts.zero_causal_output) {
    p.add("cout.w", Matrix::Zero(h, s), false);
    p.add("cout.b", Matrix::Zero(1, s), false);
  } else {
    p.add("cout.w", normal_matrix(h, s, sd, rng), false);
    p.add("cout.b", normal_matrix(1, s, sd, rng), false);
  }
  return p;
}

void HybridParams::add(std::string name, Matrix value, bool noncausal) {
  if (index_.count(name) != 0) throw InvalidArgument("duplicate parameter block " + name);
  index_.emplace(name, static_cast<int>(blocks_.size()));
  blocks_.push_back({std::move(name), std::move(value), noncausal});
}

int HybridParams::index_of(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter block " + name);
  return it->second;
}

const Matrix& HybridParams::at(const std::string& name) const {
  return blocks_[static_cast<std::size_t>(index_of(name))].value;
}

Matrix& HybridParams::at(const std::string& name) {
  return blocks_[static_cast<std::size_t>(index_of(name))].value;
}

std::size_t HybridParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += static_cast<std::size_t>(b.value.size());
  return n;
}

bool HybridParams::all_finite() const {
  return std::all_of(blocks_.begin(), blocks_.end(), [](const ParamBlock& b) { return b.value.allFinite(); });
}

AttentionMasks build_attention_masks(const Ordering& ordering, int revealed) {
  const int d = ordering.size();
  if (revealed < 0 || revealed > d) throw InvalidArgument("revealed count out of range");
  AttentionMasks m;
  m.noncausal.assign(static_cast<std::size_t>(d), std::vector<bool>(static_cast<std::size_t>(d), true));
  m.causal.assign(static_cast<std::size_t>(d), std::vector<bool>(static_cast<std::size_t>(d), false));
  for (int q = 0; q < d; ++q) {
    for (int k = 0; k < d; ++k) {
      m.causal[static_cast<std::size_t>(q)][static_cast<std::size_t>(k)] =
          ordering.rank_of(k) <= ordering.rank_of(q);
    }
  }
  return m;
}

HybridModel::HybridModel(const HybridConfig& cfg, HybridParams params)
    : cfg_(cfg), spec_(cfg.spec()), params_(std::move(params)) {
  cfg_.validate();
  const int h = cfg.hidden;
  auto expect = [&](const std::string& name, Eigen::Index r, Eigen::Index c) {
    const Matrix& m = params_.at(name);
    if (m.rows() != r || m.cols() != c) {
      throw InvalidArgument("parameter " + name + " has shape " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" +
                            std::to_string(c));
    }
  };
  expect("tok_emb", cfg.alphabet_size + 1, h);
  expect("pos_emb", cfg.length, h);
  expect("out.w", h, cfg.alphabet_size);
  expect("ctok_emb", cfg.alphabet_size, h);
  expect("cpos_cur", cfg.length, h);
  expect("cpos_next", cfg.length, h);
  expect("inj.w", 2 * h, h);
  expect("cout.w", h, cfg.alphabet_size);
  for (int b = 0; b < cfg.nc_blocks; ++b) expect("nc" + std::to_string(b) + ".qkv.w", h, 3 * h);
  for (int b = 0; b < cfg.c_blocks; ++b) expect("c" + std::to_string(b) + ".fc1.w", h, cfg.mlp_mult * h);
  if (!params_.all_finite()) throw InvalidArgument("hybrid parameters contain non-finite values");
}

DraftPass HybridModel::draft(const RevealState& state, int horizon) const {
  if (state.spec() != spec_) throw InvalidArgument("state spec differs from model spec");
  const int i = state.revealed_count();
  const int d = spec_.length();
  if (horizon < 0 || i + horizon > d || (horizon == 0 && i < d)) {
    throw InvalidArgument("draft horizon " + std::to_string(horizon) + " out of range");
  }
  Tape tape(false);
  Net net(tape, cfg_, params_, false, false);
  const auto toks = state.sequence().tokens();
  const Net::NoncausalOut out = net.noncausal(std::vector<int>(toks.begin(), toks.end()));
  auto cache = std::make_shared<HybridCache>(tape.value(out.hidden), tape.value(out.logits));
  DraftPass pass{state, horizon, {}, cache};
  pass.rows.reserve(static_cast<std::size_t>(horizon));
  for (int r = i; r < i + horizon; ++r) {
    pass.rows.push_back(softmax_row(cache->logits.row(state.ordering().at(r))));
  }
  return pass;
}

std::vector<ProbRow> HybridModel::target_rows(const DraftPass& pass, std::span<const Token> drafted,
                                              int from, int to) const {
  check_target_request(pass, drafted, from, to);
  const auto* cache = dynamic_cast<const HybridCache*>(pass.cache.get());
  if (cache == nullptr) throw InvalidArgument("draft pass was not produced by a hybrid model");
  const int i = pass.first_rank();
  const Ordering& order = pass.state.ordering();

  Net::Tracks tracks;
  for (int r = i; r + 1 < to; ++r) {
    const int cur = order.at(r);
    const int nxt = order.at(r + 1);
    tracks.tokens.push_back(drafted[static_cast<std::size_t>(r - i)]);
    tracks.cur.push_back(cur);
    tracks.next.push_back(nxt);
    tracks.hid_cur.push_back(cur);
    tracks.hid_next.push_back(nxt);
  }
  Matrix clog;
  if (!tracks.tokens.empty()) {
    tracks.segments.push_back({0, static_cast<int>(tracks.tokens.size())});
    Tape tape(false);
    Net net(tape, cfg_, params_, false, false);
    const Var hidden = tape.leaf(cache->hidden, false);
    clog = tape.value(net.causal(hidden, tracks));
  }

  std::vector<ProbRow> rows;
  rows.reserve(static_cast<std::size_t>(to - from));
  for (int r = from; r < to; ++r) {
    if (r == i) {
      rows.push_back(pass.row_at_rank(i));
      continue;
    }
    const Eigen::RowVectorXd z = clog.row(r - 1 - i) + cache->logits.row(order.at(r));
    rows.push_back(softmax_row(z));
  }
  return rows;
}

HybridLoss HybridModel::loss(std::span<const TrainExample> batch) const {
  Tape tape(false);
  Net net(tape, cfg_, params_, false, false);
  const auto [nc, c] = build_loss(net, tape, cfg_, batch);
  return {tape.value(nc)(0, 0), tape.value(c)(0, 0)};
}

HybridGradient HybridModel::loss_and_gradient(std::span<const TrainExample> batch,
                                              bool freeze_noncausal) const {
  Tape tape(true);
  Net net(tape, cfg_, params_, !freeze_noncausal, true);
  const auto [nc, c] = build_loss(net, tape, cfg_, batch);
  const Var total = tape.add(nc, c);
  tape.backward(total);

  HybridGradient out;
  out.loss = {tape.value(nc)(0, 0), tape.value(c)(0, 0)};
  if (!std::isfinite(out.loss.total())) throw NonFiniteError("non-finite training loss");
  out.grads.reserve(params_.blocks().size());
  for (std::size_t k = 0; k < params_.blocks().size(); ++k) {
    const Matrix& g = tape.grad(net.vars()[k]);
    const Matrix& v = params_.blocks()[k].value;
    if (g.size() == 0) {
      out.grads.push_back(Matrix::Zero(v.rows(), v.cols()));
    } else {
      if (!g.allFinite()) throw NonFiniteError("non-finite gradient in " + params_.blocks()[k].name);
      out.grads.push_back(g);
    }
  }
  return out;
}

GradientCheckResult check_gradients(const HybridModel& model, std::span<const TrainExample> batch,
                                    int coords_per_block, double step, double floor,
                                    RandomStream& rng) {
  const HybridGradient analytic = model.loss_and_gradient(batch);
  HybridModel probe = model;
  GradientCheckResult res;
  auto& blocks = probe.mutable_params().blocks();
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    Matrix& v = blocks[k].value;
    const auto n = static_cast<std::uint32_t>(v.size());
    double worst = 0.0;
    const int count = std::min<int>(coords_per_block, static_cast<int>(n));
    std::vector<std::uint32_t> coords(n);
    for (std::uint32_t c = 0; c < n; ++c) coords[c] = c;
    // Partial Fisher-Yates: the first `count` entries are a uniform sample.
    for (int c = 0; c < count; ++c) {
      const auto j = static_cast<std::uint32_t>(c) + rng.uniform_index(n - static_cast<std::uint32_t>(c));
      std::swap(coords[static_cast<std::size_t>(c)], coords[j]);
    }
    for (int c = 0; c < count; ++c) {
      double& x = v.data()[coords[static_cast<std::size_t>(c)]];
      const double orig = x;
      x = orig + step;
      const double up = probe.loss(batch).total();
      x = orig - step;
      const double down = probe.loss(batch).total();
      x = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.grads[k].data()[coords[static_cast<std::size_t>(c)]];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, rel);
      ++res.coordinates_checked;
    }
    res.max_rel_error.push_back(worst);
    if (worst >= res.worst) {
      res.worst = worst;
      res.worst_block = blocks[k].name;
    }
  }
  return res;
}

}  // namespace ssmd
