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

#include <algorithm>
#include <cmath>

#include "gtest/gtest.h"
#include "ssmd/hybrid_model.hpp"
#include "ssmd/model.hpp"
#include "ssmd/random.hpp"
#include "ssmd/tabular_model.hpp"
#include "ssmd/train.hpp"
#include "test_util.hpp"

using namespace ssmd;
using ssmd::fixtures::random_row;

namespace {

const SequenceSpec kSpec22(2, 2);

TabularModel two_by_two(TabularOptions opts = {}) {
  return TabularModel(kSpec22, {0.4, 0.1, 0.1, 0.4}, opts);
}

void expect_rows_equal(const ProbRow& a, const ProbRow& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (int t = 0; t < a.size(); ++t) EXPECT_NEAR(a[t], b[t], tol) << "token " << t;
}

// Random fully revealed sequence; probes overwrite drafted slots anyway.
TokenSequence random_sequence(const SequenceSpec& spec, RandomStream& rng) {
  std::vector<Token> x(static_cast<std::size_t>(spec.length()));
  for (Token& t : x) t = static_cast<Token>(rng.uniform_index(static_cast<std::uint32_t>(spec.alphabet_size())));
  return TokenSequence(spec, x);
}

// Checks that target rows at rank r only read drafted tokens at ranks < r,
// and that draft rows ignore everything drafted.
void probe_causality(const SpeculativeModel& model, int probes, std::uint64_t seed) {
  RandomStream rng(seed);
  const SequenceSpec& spec = model.spec();
  const int d = spec.length();
  const auto s = static_cast<std::uint32_t>(spec.alphabet_size());
  for (int p = 0; p < probes; ++p) {
    const TokenSequence x = random_sequence(spec, rng);
    const Ordering sigma = sample_ordering(rng, d);
    const int i = static_cast<int>(rng.uniform_index(static_cast<std::uint32_t>(d)));
    const RevealState state = make_reveal_state(x, sigma, i);
    const DraftPass pass = model.draft(state, d - i);
    std::vector<Token> a(static_cast<std::size_t>(d - i));
    for (Token& t : a) t = static_cast<Token>(rng.uniform_index(s));
    const int cut = static_cast<int>(rng.uniform_index(static_cast<std::uint32_t>(d - i)));
    std::vector<Token> b = a;
    for (std::size_t k = static_cast<std::size_t>(cut); k < b.size(); ++k) {
      b[k] = static_cast<Token>(rng.uniform_index(s));
    }
    const auto ra = model.target_rows(pass, std::span(a).first(a.size() - 1), i, d);
    const auto rb = model.target_rows(pass, std::span(b).first(b.size() - 1), i, d);
    // Ranks i..i+cut see identical drafted prefixes.
    for (int r = i; r <= i + cut; ++r) {
      ASSERT_EQ(ra[static_cast<std::size_t>(r - i)], rb[static_cast<std::size_t>(r - i)])
          << "probe " << p << " rank " << r << " cut " << cut;
    }
    EXPECT_EQ(pass.rows, model.draft(state, d - i).rows);
  }
}

}  // namespace

TEST(tabular_model, validates_joint) {
  EXPECT_THROW(TabularModel(kSpec22, {0.5, 0.5}), InvalidArgument);
  EXPECT_THROW(TabularModel(kSpec22, {0.5, 0.5, 0.1, -0.1}), InvalidArgument);
  EXPECT_THROW(TabularModel(kSpec22, {0.5, 0.5, 0.1, 0.1}), InvalidArgument);
  EXPECT_THROW(TabularModel(SequenceSpec(2, 2), {0.25, 0.25, 0.25, 0.25}, {1.5, 0.0, false, {}}),
               InvalidArgument);
  RandomStream rng(0);
  EXPECT_THROW(TabularModel::random(SequenceSpec(16, 8), rng), InvalidArgument);
}

TEST(tabular_model, uniform_joint_gives_uniform_rows) {
  const SequenceSpec spec(3, 3);
  const TabularModel m(spec, std::vector<double>(27, 1.0 / 27.0));
  const RevealState st = make_reveal_state(TokenSequence(spec, {0, 2, 1}), Ordering({1, 0, 2}), 1);
  for (int r = 1; r < 3; ++r) expect_rows_equal(m.draft_row(st, r), ProbRow::uniform(3), 1e-15);
}

TEST(tabular_model, draft_rows_worked_examples) {
  const TabularModel m = two_by_two();
  const TokenSequence x(kSpec22, {0, 0});
  const Ordering id = Ordering::identity(2);
  expect_rows_equal(m.draft_row(make_reveal_state(x, id, 1), 1), ProbRow({0.8, 0.2}), 1e-15);
  expect_rows_equal(m.draft_row(make_reveal_state(x, id, 0), 1), ProbRow({0.5, 0.5}), 1e-15);
}

TEST(tabular_model, target_rows_worked_examples) {
  const TabularModel m = two_by_two();
  const RevealState st = make_reveal_state(TokenSequence(kSpec22, {0, 0}), Ordering::identity(2), 0);
  const std::vector<Token> drafted = {0};
  expect_rows_equal(m.target_row(st, drafted, 1), ProbRow({0.8, 0.2}), 1e-15);
  expect_rows_equal(m.target_row(st, {}, 0), m.draft_row(st, 0), 0.0);
}

TEST(tabular_model, perturbed_draft_mixes_uniform) {
  const TabularModel m = two_by_two({0.2, 0.0, false, {}});
  const RevealState st = make_reveal_state(TokenSequence(kSpec22, {0, 0}), Ordering::identity(2), 1);
  expect_rows_equal(m.draft_row(st, 1), ProbRow({0.8 * 0.8 + 0.1, 0.2 * 0.8 + 0.1}), 1e-15);
}

TEST(tabular_model, impossible_context_is_an_error) {
  const TabularModel m(kSpec22, {0.5, 0.5, 0.0, 0.0});
  const RevealState st = make_reveal_state(TokenSequence(kSpec22, {1, 0}), Ordering::identity(2), 1);
  EXPECT_THROW(m.draft_row(st, 1), ImpossibleContext);
}

TEST(tabular_model, product_joint_target_equals_draft) {
  RandomStream rng(31);
  const SequenceSpec spec(3, 4);
  std::vector<ProbRow> marg;
  for (int k = 0; k < 4; ++k) marg.push_back(random_row(3, rng));
  const TabularModel m = TabularModel::product(spec, marg);
  for (int trial = 0; trial < 50; ++trial) {
    const TokenSequence x = random_sequence(spec, rng);
    const Ordering sigma = sample_ordering(rng, 4);
    const int i = static_cast<int>(rng.uniform_index(4));
    const RevealState st = make_reveal_state(x, sigma, i);
    std::vector<Token> drafted(4);
    for (Token& t : drafted) t = static_cast<Token>(rng.uniform_index(3));
    for (int r = i; r < 4; ++r) expect_rows_equal(m.target_row(st, drafted, r), m.draft_row(st, r), 1e-12);
  }
}

TEST(tabular_model, chain_rule_recovers_joint) {
  RandomStream rng(32);
  const SequenceSpec spec(3, 4);
  const TabularModel m = TabularModel::random(spec, rng);
  for (std::size_t idx = 0; idx < 81; ++idx) {
    const TokenSequence x(spec, m.decode(idx));
    const Ordering sigma = sample_ordering(rng, 4);
    const RevealState st = make_reveal_state(x, sigma, 0);
    std::vector<Token> drafted;
    double p = 1.0;
    for (int r = 0; r < 4; ++r) {
      p *= m.target_row(st, drafted, r)[x[sigma.at(r)]];
      drafted.push_back(x[sigma.at(r)]);
    }
    EXPECT_NEAR(p, m.probability(x.tokens()), 1e-10);
  }
}

TEST(tabular_model, first_slot_fallback_equals_draft) {
  RandomStream rng(33);
  const TabularModel m = TabularModel::random(SequenceSpec(3, 3), rng, {0.3, 0.0, true, {}});
  const RevealState st = make_reveal_state(TokenSequence(m.spec(), {1, 2, 0}), Ordering({2, 1, 0}), 1);
  const DraftPass pass = m.draft(st, 2);
  const std::vector<Token> drafted = {0};
  EXPECT_EQ(m.target_rows(pass, drafted, 1, 3)[0], pass.rows[0]);
}

TEST(tabular_model, target_causality_and_draft_invariance) {
  RandomStream rng(34);
  probe_causality(fixtures::perturbed_tabular(3, 4, rng), 1000, 35);
}

TEST(tabular_model, decode_is_row_major) {
  const TabularModel m = two_by_two();
  EXPECT_EQ(m.decode(1), (std::vector<Token>{0, 1}));
  EXPECT_EQ(m.decode(2), (std::vector<Token>{1, 0}));
  EXPECT_DOUBLE_EQ(m.probability(m.decode(1)), 0.1);
  EXPECT_NEAR(m.entropy(), -(2 * 0.4 * std::log(0.4) + 2 * 0.1 * std::log(0.1)), 1e-15);
}

TEST(model_interface, target_request_validation) {
  const TabularModel m = two_by_two();
  const RevealState st = make_reveal_state(TokenSequence(kSpec22, {0, 0}), Ordering::identity(2), 0);
  const DraftPass pass = m.draft(st, 2);
  EXPECT_THROW(m.target_rows(pass, {}, 0, 2), InvalidArgument);
  EXPECT_THROW(m.target_rows(pass, std::vector<Token>{0}, 0, 3), InvalidArgument);
  EXPECT_THROW(m.target_rows(pass, std::vector<Token>{5}, 0, 2), InvalidArgument);
  EXPECT_THROW(m.draft(st, 3), InvalidArgument);
  EXPECT_NO_THROW(m.target_rows(pass, std::vector<Token>{0}, 0, 2));
}

TEST(counting_model, counts_passes) {
  const TabularModel m = two_by_two();
  CountingModel c(m);
  const RevealState st = make_reveal_state(TokenSequence(kSpec22, {0, 0}), Ordering::identity(2), 0);
  const DraftPass pass = c.draft(st, 2);
  c.target_rows(pass, std::vector<Token>{1}, 0, 2);
  c.target_rows(pass, std::vector<Token>{1}, 1, 2);
  EXPECT_EQ(c.draft_calls(), 1);
  EXPECT_EQ(c.target_calls(), 2);
}

TEST(attention_masks, left_to_right_pair) {
  const AttentionMasks m = build_attention_masks(Ordering({0, 1}), 0);
  EXPECT_EQ(m.causal[0], (std::vector<bool>{true, false}));
  EXPECT_EQ(m.causal[1], (std::vector<bool>{true, true}));
}

TEST(attention_masks, six_token_example) {
  const AttentionMasks m = build_attention_masks(Ordering({5, 4, 1, 3, 2, 0}), 2);
  const auto& row = m.causal[2];
  EXPECT_EQ(std::count(row.begin(), row.end(), true), 5);
  EXPECT_FALSE(row[0]);
}

TEST(attention_masks, noncausal_all_true) {
  RandomStream rng(36);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(rng.uniform_index(9));
    const Ordering o = sample_ordering(rng, d);
    const AttentionMasks m = build_attention_masks(o, static_cast<int>(rng.uniform_index(static_cast<std::uint32_t>(d + 1))));
    for (const auto& row : m.noncausal) EXPECT_TRUE(std::all_of(row.begin(), row.end(), [](bool b) { return b; }));
    for (int q = 0; q < d; ++q) {
      EXPECT_EQ(std::count(m.causal[static_cast<std::size_t>(q)].begin(), m.causal[static_cast<std::size_t>(q)].end(), true),
                o.rank_of(q) + 1);
    }
  }
}

TEST(hybrid_model, config_validation) {
  HybridConfig cfg;
  cfg.hidden = 30;
  cfg.heads = 4;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = HybridConfig{};
  cfg.c_blocks = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(hybrid_model, zero_output_projection_gives_uniform_draft) {
  HybridModel m = fixtures::small_hybrid(40, true);
  m.mutable_params().at("out.w").setZero();
  m.mutable_params().at("out.b").setZero();
  const SequenceSpec spec = m.spec();
  const RevealState st = make_reveal_state(TokenSequence(spec, {0, 1, 2, 3, 4, 0}), Ordering::identity(6), 2);
  const DraftPass pass = m.draft(st, 4);
  for (const ProbRow& r : pass.rows) expect_rows_equal(r, ProbRow::uniform(5), 1e-15);
}

TEST(hybrid_model, deterministic_rows) {
  const HybridModel m = fixtures::small_hybrid(41, false);
  const RevealState st = make_reveal_state(TokenSequence(m.spec(), {0, 1, 2, 3, 4, 0}), Ordering({3, 1, 0, 5, 2, 4}), 2);
  const DraftPass a = m.draft(st, 4);
  const DraftPass b = m.draft(st, 4);
  EXPECT_EQ(a.rows, b.rows);
  const std::vector<Token> drafted = {1, 2, 3};
  EXPECT_EQ(m.target_rows(a, drafted, 2, 6), m.target_rows(b, drafted, 2, 6));
}

TEST(hybrid_model, masked_values_do_not_leak) {
  const HybridModel m = fixtures::small_hybrid(42, false);
  const Ordering sigma({3, 1, 0, 5, 2, 4});
  const RevealState a = make_reveal_state(TokenSequence(m.spec(), {0, 1, 2, 3, 4, 0}), sigma, 2);
  const RevealState b = make_reveal_state(TokenSequence(m.spec(), {4, 1, 0, 3, 1, 2}), sigma, 2);
  EXPECT_EQ(m.draft(a, 4).rows, m.draft(b, 4).rows);
}

TEST(hybrid_model, zero_causal_output_makes_target_equal_draft) {
  const HybridModel m = fixtures::small_hybrid(43, true);
  RandomStream rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const TokenSequence x = random_sequence(m.spec(), rng);
    const Ordering sigma = sample_ordering(rng, 6);
    const int i = static_cast<int>(rng.uniform_index(6));
    const DraftPass pass = m.draft(make_reveal_state(x, sigma, i), 6 - i);
    std::vector<Token> drafted(static_cast<std::size_t>(5 - i));
    for (Token& t : drafted) t = static_cast<Token>(rng.uniform_index(5));
    const auto rows = m.target_rows(pass, drafted, i, 6);
    for (std::size_t k = 0; k < rows.size(); ++k) EXPECT_EQ(rows[k], pass.rows[k]);
  }
}

TEST(hybrid_model, first_slot_equals_draft_after_random_init) {
  const HybridModel m = fixtures::small_hybrid(45, false);
  const DraftPass pass = m.draft(make_reveal_state(TokenSequence(m.spec(), {0, 1, 2, 3, 4, 0}), Ordering::identity(6), 3), 3);
  const std::vector<Token> drafted = {1, 1};
  const auto rows = m.target_rows(pass, drafted, 3, 6);
  EXPECT_EQ(rows[0], pass.rows[0]);
  EXPECT_NE(rows[1], pass.rows[1]);
}

TEST(hybrid_model, target_causality_and_draft_invariance) {
  probe_causality(fixtures::small_hybrid(46, false), 1000, 47);
}

TEST(hybrid_model, batch_order_does_not_couple_examples) {
  const HybridModel m = fixtures::small_hybrid(48, false);
  const TrainExample a{{0, 1, 2, 3, 4, 0}, Ordering({3, 1, 0, 5, 2, 4}), 2, 1.0};
  const TrainExample b{{4, 4, 2, 1, 0, 3}, Ordering({0, 1, 2, 3, 4, 5}), 1, 1.0};
  const std::vector<TrainExample> ab = {a, b};
  const std::vector<TrainExample> ba = {b, a};
  const HybridLoss l1 = m.loss(ab);
  const HybridLoss l2 = m.loss(ba);
  EXPECT_NEAR(l1.noncausal, l2.noncausal, 1e-13);
  EXPECT_NEAR(l1.causal, l2.causal, 1e-13);
  const HybridLoss la = m.loss(std::span(&a, 1));
  const HybridLoss lb = m.loss(std::span(&b, 1));
  EXPECT_NEAR(l1.noncausal, 0.5 * (la.noncausal + lb.noncausal), 1e-13);
}

TEST(hybrid_model, loss_matches_rows_from_inference_path) {
  const HybridModel m = fixtures::small_hybrid(49, false);
  const TrainExample ex{{0, 1, 2, 3, 4, 0}, Ordering({3, 1, 0, 5, 2, 4}), 2, 1.0};
  const HybridLoss l = m.loss(std::span(&ex, 1));
  const HybridLoss ref = masked_config_loss(m, ex.tokens, ex.ordering, ex.revealed);
  EXPECT_NEAR(l.noncausal, ref.noncausal, 1e-10);
  EXPECT_NEAR(l.causal, ref.causal, 1e-10);
}

TEST(hybrid_backward, gradient_check_every_block) {
  const HybridModel m = fixtures::small_hybrid(50, false);
  RandomStream rng(51);
  std::vector<TrainExample> batch;
  for (int b = 0; b < 3; ++b) {
    std::vector<Token> x(6);
    for (Token& t : x) t = static_cast<Token>(rng.uniform_index(5));
    MaskConfig mc = sample_mask_config(rng, 6, {});
    while (mc.revealed == 6) mc = sample_mask_config(rng, 6, {});
    batch.push_back({x, mc.ordering, mc.revealed, 1.0});
  }
  const GradientCheckResult r = check_gradients(m, batch, 10, 1e-5, 1e-5, rng);
  EXPECT_LT(r.worst, 1e-4) << r.worst_block;
  EXPECT_EQ(r.max_rel_error.size(), m.params().blocks().size());
}

TEST(hybrid_backward, all_masked_batch_reaches_both_stacks) {
  const HybridModel m = fixtures::small_hybrid(52, true);
  const TrainExample ex{{0, 1, 2, 3, 4, 0}, Ordering({3, 1, 0, 5, 2, 4}), 0, 1.0};
  const HybridGradient g = m.loss_and_gradient(std::span(&ex, 1));
  const auto& blocks = m.params().blocks();
  EXPECT_GT(g.grads[static_cast<std::size_t>(m.params().index_of("cout.w"))].norm(), 0.0);
  EXPECT_GT(g.grads[static_cast<std::size_t>(m.params().index_of("out.w"))].norm(), 0.0);
  EXPECT_EQ(g.grads.size(), blocks.size());
}

TEST(hybrid_backward, zero_weight_gives_zero_gradient) {
  const HybridModel m = fixtures::small_hybrid(53, false);
  const TrainExample ex{{0, 1, 2, 3, 4, 0}, Ordering({3, 1, 0, 5, 2, 4}), 1, 0.0};
  const HybridGradient g = m.loss_and_gradient(std::span(&ex, 1));
  for (const auto& gr : g.grads) EXPECT_EQ(gr.norm(), 0.0);
}

TEST(hybrid_backward, frozen_noncausal_blocks_get_no_gradient) {
  const HybridModel m = fixtures::small_hybrid(54, false);
  const TrainExample ex{{0, 1, 2, 3, 4, 0}, Ordering({3, 1, 0, 5, 2, 4}), 1, 1.0};
  const HybridGradient g = m.loss_and_gradient(std::span(&ex, 1), true);
  double nc = 0.0;
  double c = 0.0;
  for (std::size_t k = 0; k < g.grads.size(); ++k) {
    (m.params().blocks()[k].noncausal ? nc : c) += g.grads[k].norm();
  }
  EXPECT_EQ(nc, 0.0);
  EXPECT_GT(c, 0.0);
}

TEST(hybrid_params, block_lookup_and_counts) {
  const HybridModel m = fixtures::small_hybrid(55, true);
  EXPECT_THROW(m.params().at("missing"), InvalidArgument);
  EXPECT_TRUE(m.params().all_finite());
  std::size_t n = 0;
  for (const auto& b : m.params().blocks()) n += static_cast<std::size_t>(b.value.size());
  EXPECT_EQ(n, m.params().parameter_count());
  EXPECT_EQ(m.block_counts().noncausal, 2);
  EXPECT_EQ(m.block_counts().causal, 1);
}
