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

#include "ssmd/train.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "json.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace ssmd {
namespace {

void shuffle(std::vector<int>& v, RandomStream& rng) {
  for (std::size_t k = v.size(); k > 1; --k) {
    const std::size_t j = rng.uniform_index(static_cast<std::uint32_t>(k));
    std::swap(v[k - 1], v[j]);
  }
}

bool decays(const ad::Matrix& m) { return m.rows() > 1; }

}  // namespace

void TrainConfig::validate() const {
  if (steps < 0) throw InvalidArgument("train.steps must be >= 0");
  if (batch_size < 1) throw InvalidArgument("train.batch_size must be >= 1");
  if (warmup < 0) throw InvalidArgument("train.warmup must be >= 0");
  if (!(peak_lr > 0.0)) throw InvalidArgument("train.peak_lr must be > 0");
  if (weight_decay < 0.0) throw InvalidArgument("train.weight_decay must be >= 0");
  if (eval_every < 1) throw InvalidArgument("train.eval_every must be >= 1");
  if (eval_sequences < 1) throw InvalidArgument("eval_sequences must be >= 1");
  if (final_lr_ratio < 0.0 || final_lr_ratio > 1.0) throw InvalidArgument("final_lr_ratio must lie in [0, 1]");
}

MaskConfig sample_mask_config_at(RandomStream& rng, int length, const NoiseSchedule& sched, double t) {
  const double keep = keep_prob(sched, t);
  std::vector<int> revealed;
  std::vector<int> masked;
  for (int p = 0; p < length; ++p) (rng.uniform() < keep ? revealed : masked).push_back(p);
  shuffle(revealed, rng);
  shuffle(masked, rng);
  const int i = static_cast<int>(revealed.size());
  revealed.insert(revealed.end(), masked.begin(), masked.end());
  return {Ordering(std::move(revealed)), i};
}

MaskConfig sample_mask_config(RandomStream& rng, int length, const NoiseSchedule& sched) {
  const double t = rng.uniform();
  return sample_mask_config_at(rng, length, sched, t);
}

HybridLoss masked_config_loss(const SpeculativeModel& model, std::span<const Token> x, const Ordering& sigma,
                    int revealed) {
  const int d = model.spec().length();
  if (revealed < 0 || revealed >= d) throw InvalidArgument("loss needs 0 <= revealed < D");
  const TokenSequence seq(model.spec(), std::vector<Token>(x.begin(), x.end()));
  const RevealState state = make_reveal_state(seq, sigma, revealed);
  const DraftPass pass = model.draft(state, d - revealed);
  std::vector<Token> drafted;
  for (int r = revealed; r + 1 < d; ++r) drafted.push_back(x[static_cast<std::size_t>(sigma.at(r))]);
  const std::vector<ProbRow> targets = model.target_rows(pass, drafted, revealed, d);
  const double w = static_cast<double>(d) / static_cast<double>(d - revealed);
  HybridLoss out;
  for (int r = revealed; r < d; ++r) {
    const Token t = x[static_cast<std::size_t>(sigma.at(r))];
    out.noncausal -= w * std::log(pass.row_at_rank(r)[t]);
    out.causal -= w * std::log(targets[static_cast<std::size_t>(r - revealed)][t]);
  }
  return out;
}

double learning_rate(const TrainConfig& cfg, int step) {
  if (cfg.warmup > 0 && step < cfg.warmup) {
    return cfg.peak_lr * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup);
  }
  const int decay_steps = std::max(1, cfg.steps - cfg.warmup);
  const double progress = std::min(1.0, static_cast<double>(step - cfg.warmup) / decay_steps);
  const double floor = cfg.final_lr_ratio;
  return cfg.peak_lr * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

AdamW::AdamW(const HybridParams& params) {
  for (const auto& b : params.blocks()) {
    m_.push_back(ad::Matrix::Zero(b.value.rows(), b.value.cols()));
    v_.push_back(ad::Matrix::Zero(b.value.rows(), b.value.cols()));
  }
}

void AdamW::step(HybridParams& params, const std::vector<ad::Matrix>& grads, double lr,
                 const TrainConfig& cfg) {
  auto& blocks = params.blocks();
  if (grads.size() != blocks.size() || m_.size() != blocks.size()) {
    throw InvalidArgument("optimizer state does not match the parameter blocks");
  }
  double scale = 1.0;
  if (cfg.grad_clip > 0.0) {
    double sq = 0.0;
    for (const auto& g : grads) sq += g.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip) scale = cfg.grad_clip / norm;
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (cfg.freeze_noncausal && blocks[k].noncausal) continue;
    ad::Matrix& p = blocks[k].value;
    const ad::Matrix g = grads[k] * scale;
    m_[k] = cfg.beta1 * m_[k] + (1.0 - cfg.beta1) * g;
    v_[k] = cfg.beta2 * v_[k] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    if (decays(p)) p *= (1.0 - lr * cfg.weight_decay);
    p.array() -= lr * (m_[k].array() / bc1) / ((v_[k].array() / bc2).sqrt() + cfg.adam_eps);
  }
}

std::vector<NamedMatrix> AdamW::state_blocks(const HybridParams& params) const {
  std::vector<NamedMatrix> out;
  for (std::size_t k = 0; k < m_.size(); ++k) {
    out.push_back({"adam.m." + params.blocks()[k].name, m_[k]});
    out.push_back({"adam.v." + params.blocks()[k].name, v_[k]});
  }
  ad::Matrix t(1, 1);
  t(0, 0) = static_cast<double>(t_);
  out.push_back({"adam.t", t});
  return out;
}

void AdamW::load_state(const Checkpoint& ckpt, const HybridParams& params) {
  *this = AdamW(params);
  for (std::size_t k = 0; k < params.blocks().size(); ++k) {
    const auto* m = ckpt.find("adam.m." + params.blocks()[k].name);
    const auto* v = ckpt.find("adam.v." + params.blocks()[k].name);
    if (m == nullptr || v == nullptr) throw CheckpointError("checkpoint has no optimizer state");
    m_[k] = *m;
    v_[k] = *v;
  }
  const auto* t = ckpt.find("adam.t");
  if (t == nullptr) throw CheckpointError("checkpoint has no optimizer step");
  t_ = static_cast<long>((*t)(0, 0));
}

Trainer::Trainer(HybridModel model, TrainConfig cfg, std::vector<std::vector<Token>> train_set,
                 std::vector<std::vector<Token>> eval_set)
    : model_(std::move(model)), cfg_(cfg), train_(std::move(train_set)), opt_(model_.params()) {
  cfg_.validate();
  if (train_.empty()) throw InvalidArgument("training corpus is empty");
  if (eval_set.empty()) eval_set = train_;
  const int d = model_.spec().length();
  for (const auto* set : {&train_, &eval_set}) {
    for (const auto& s : *set) {
      if (static_cast<int>(s.size()) != d) throw InvalidArgument("corpus sequence length differs from model length");
      for (Token t : s) {
        if (!model_.spec().is_symbol(t)) throw InvalidArgument("corpus token outside the alphabet");
      }
    }
  }
  RandomStream rng(cfg_.seed, kEvalStream);
  for (int k = 0; k < cfg_.eval_sequences; ++k) {
    const auto& x = eval_set[static_cast<std::size_t>(k) % eval_set.size()];
    MaskConfig mc = sample_mask_config(rng, d, cfg_.schedule);
    while (mc.revealed == d) mc = sample_mask_config(rng, d, cfg_.schedule);
    eval_batch_.push_back({x, mc.ordering, mc.revealed, 1.0});
  }
}

Trainer Trainer::resume(const std::filesystem::path& checkpoint, TrainConfig cfg,
                        std::vector<std::vector<Token>> train_set,
                        std::vector<std::vector<Token>> eval_set) {
  const Checkpoint ckpt = read_checkpoint(checkpoint);
  Trainer t(load_hybrid(ckpt), cfg, std::move(train_set), std::move(eval_set));
  t.opt_.load_state(ckpt, t.model_.params());
  const auto* step = ckpt.find("train.step");
  if (step == nullptr) throw CheckpointError("checkpoint has no training step");
  t.step_ = static_cast<int>((*step)(0, 0));
  return t;
}

std::vector<TrainExample> Trainer::make_batch(int step) const {
  const int d = model_.spec().length();
  RandomStream rng = RandomStream(cfg_.seed, kBatchStream).split(static_cast<std::uint64_t>(step));
  std::vector<TrainExample> batch;
  batch.reserve(static_cast<std::size_t>(cfg_.batch_size));
  for (int b = 0; b < cfg_.batch_size; ++b) {
    const auto idx = rng.uniform_index(static_cast<std::uint32_t>(train_.size()));
    MaskConfig mc = sample_mask_config(rng, d, cfg_.schedule);
    while (mc.revealed == d) mc = sample_mask_config(rng, d, cfg_.schedule);
    batch.push_back({train_[idx], std::move(mc.ordering), mc.revealed, 1.0});
  }
  return batch;
}

LossReport Trainer::train_step() {
  const std::vector<TrainExample> batch = make_batch(step_);
  HybridGradient g;
  try {
    g = model_.loss_and_gradient(batch, cfg_.freeze_noncausal);
  } catch (const NonFiniteError& e) {
    throw TrainingAborted(std::string(e.what()) + " at step " + std::to_string(step_) +
                          " (batch stream: seed " + std::to_string(cfg_.seed) + ", split " +
                          std::to_string(step_) + ")");
  }
  opt_.step(model_.mutable_params(), g.grads, learning_rate(cfg_, step_), cfg_);
  if (!model_.params().all_finite()) {
    throw TrainingAborted("parameters became non-finite at step " + std::to_string(step_) +
                          " (batch stream: seed " + std::to_string(cfg_.seed) + ", split " +
                          std::to_string(step_) + ")");
  }
  const double d = model_.spec().length();
  LossReport r{step_, g.loss.noncausal / d, g.loss.causal / d};
  ++step_;
  return r;
}

LossReport Trainer::evaluate() const {
  const double d = model_.spec().length();
  // Evaluated in chunks to bound tape memory.
  constexpr std::size_t kChunk = 64;
  HybridLoss sum;
  for (std::size_t k = 0; k < eval_batch_.size(); k += kChunk) {
    const std::size_t n = std::min(kChunk, eval_batch_.size() - k);
    const HybridLoss l = model_.loss(std::span(eval_batch_).subspan(k, n));
    sum.noncausal += l.noncausal * static_cast<double>(n);
    sum.causal += l.causal * static_cast<double>(n);
  }
  const auto total = static_cast<double>(eval_batch_.size());
  return {step_, sum.noncausal / total / d, sum.causal / total / d};
}

void Trainer::run(const std::function<void(const LossReport&)>& on_report) {
  while (step_ < cfg_.steps) {
    train_step();
    if (on_report && (step_ % cfg_.eval_every == 0 || step_ == cfg_.steps)) on_report(evaluate());
  }
}

void Trainer::save(const std::filesystem::path& path) const {
  std::vector<NamedMatrix> extra = opt_.state_blocks(model_.params());
  ad::Matrix s(1, 1);
  s(0, 0) = static_cast<double>(step_);
  extra.push_back({"train.step", s});
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(describe_model_json(model_.config()));
  j["train"] = {{"step", step_},
                {"steps", cfg_.steps},
                {"batch_size", cfg_.batch_size},
                {"warmup", cfg_.warmup},
                {"peak_lr", cfg_.peak_lr},
                {"weight_decay", cfg_.weight_decay},
                {"seed", cfg_.seed},
                {"freeze_noncausal", cfg_.freeze_noncausal},
                {"schedule", to_string(cfg_.schedule.kind)}};
  save_hybrid(path, model_, extra, j.dump(2));
}

void retain_heap_memory() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

std::pair<std::vector<std::vector<Token>>, std::vector<std::vector<Token>>> split_corpus(
    std::vector<std::vector<Token>> corpus, int held_out) {
  const int n = static_cast<int>(corpus.size());
  const int h = std::clamp(held_out, 0, n / 2);
  std::vector<std::vector<Token>> eval(corpus.end() - h, corpus.end());
  corpus.resize(static_cast<std::size_t>(n - h));
  return {std::move(corpus), std::move(eval)};
}

}  // namespace ssmd
