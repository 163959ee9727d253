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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ssmd/checkpoint.hpp"
#include "ssmd/hybrid_model.hpp"
#include "ssmd/schedule.hpp"

namespace ssmd {

struct TrainConfig {
  int steps = 20000;
  int batch_size = 64;
  int warmup = 200;
  double peak_lr = 3e-4;
  /// Final learning rate as a fraction of the peak after cosine decay.
  double final_lr_ratio = 0.0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  int eval_every = 500;
  /// Held-out sequences used for LossReport evaluation.
  int eval_sequences = 256;
  bool freeze_noncausal = false;
  NoiseSchedule schedule{};

  void validate() const;
};

/// Losses in nats per token: the D/(D-i)-weighted batch means divided by D.
struct LossReport {
  int step = 0;
  double noncausal = 0.0;
  double causal = 0.0;
  double total() const noexcept { return noncausal + causal; }
};

struct MaskConfig {
  Ordering ordering;
  int revealed = 0;
};

/// t ~ U(0,1); each position is revealed independently with keep_prob(t);
/// the ordering lists revealed positions first, each group shuffled.
MaskConfig sample_mask_config(RandomStream& rng, int length, const NoiseSchedule& sched);
/// Same with a fixed time t.
MaskConfig sample_mask_config_at(RandomStream& rng, int length, const NoiseSchedule& sched, double t);

/// Weighted objective for one sequence evaluated through the generic model
/// interface: noncausal = -(D/(D-i)) sum log draft(x), causal = the same over
/// target rows with the true tokens as the drafted prefix. Requires i < D.
HybridLoss masked_config_loss(const SpeculativeModel& model, std::span<const Token> x, const Ordering& sigma,
                    int revealed);

/// Linear warmup to the peak, then cosine decay to final_lr_ratio * peak.
double learning_rate(const TrainConfig& cfg, int step);

/// Adam moments with decoupled weight decay. Decay applies to matrices with
/// more than one row; biases, gains and 1-row blocks are not decayed.
class AdamW {
 public:
  AdamW() = default;
  explicit AdamW(const HybridParams& params);

  void step(HybridParams& params, const std::vector<ad::Matrix>& grads, double lr,
            const TrainConfig& cfg);
  long steps_taken() const noexcept { return t_; }

  std::vector<NamedMatrix> state_blocks(const HybridParams& params) const;
  void load_state(const Checkpoint& ckpt, const HybridParams& params);

 private:
  std::vector<ad::Matrix> m_;
  std::vector<ad::Matrix> v_;
  long t_ = 0;
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic trainer: the batch for step s is drawn from
/// RandomStream(seed, kBatchStream).split(s), so a resumed run replays the
/// same batches.
class Trainer {
 public:
  static constexpr std::uint64_t kBatchStream = 0x7472;
  static constexpr std::uint64_t kEvalStream = 0x6576;

  Trainer(HybridModel model, TrainConfig cfg, std::vector<std::vector<Token>> train_set,
          std::vector<std::vector<Token>> eval_set);

  /// Restores parameters, optimizer moments and step count.
  static Trainer resume(const std::filesystem::path& checkpoint, TrainConfig cfg,
                        std::vector<std::vector<Token>> train_set,
                        std::vector<std::vector<Token>> eval_set);

  std::vector<TrainExample> make_batch(int step) const;
  /// One optimizer step; returns the training-batch losses before the update.
  LossReport train_step();
  /// Loss on the fixed held-out batch (no update).
  LossReport evaluate() const;
  /// Runs until cfg.steps; calls on_report after every eval_every steps and
  /// at the end with held-out losses.
  void run(const std::function<void(const LossReport&)>& on_report = {});

  void save(const std::filesystem::path& path) const;

  const HybridModel& model() const noexcept { return model_; }
  int step() const noexcept { return step_; }
  const TrainConfig& config() const noexcept { return cfg_; }

 private:
  HybridModel model_;
  TrainConfig cfg_;
  std::vector<std::vector<Token>> train_;
  std::vector<TrainExample> eval_batch_;
  AdamW opt_;
  int step_ = 0;
};

/// Keeps freed memory in the process heap instead of returning it to the
/// OS. Every training step allocates and releases the same large buffers,
/// so this removes most page-fault overhead. No-op outside glibc.
void retain_heap_memory();

/// Splits a corpus into (train, held-out) with the last `held_out` sequences
/// held out (at most half the corpus).
std::pair<std::vector<std::vector<Token>>, std::vector<std::vector<Token>>> split_corpus(
    std::vector<std::vector<Token>> corpus, int held_out);

}  // namespace ssmd
