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

#include "ssmd/model.hpp"

#include <string>

namespace ssmd {

void check_target_request(const DraftPass& pass, std::span<const Token> drafted, int from, int to) {
  const int i = pass.first_rank();
  if (from < i || to > pass.end_rank() || from > to) {
    throw InvalidArgument("target ranks [" + std::to_string(from) + ", " + std::to_string(to) +
                          ") fall outside the drafted window [" + std::to_string(i) + ", " +
                          std::to_string(pass.end_rank()) + ")");
  }
  const int needed = to - 1 - i;
  if (needed > 0 && static_cast<int>(drafted.size()) < needed) {
    throw InvalidArgument("drafted prefix has " + std::to_string(drafted.size()) +
                          " tokens, need " + std::to_string(needed));
  }
  const auto& spec = pass.state.spec();
  for (int k = 0; k < needed; ++k) {
    if (!spec.is_symbol(drafted[static_cast<std::size_t>(k)])) {
      throw InvalidArgument("drafted token outside the alphabet at rank " + std::to_string(i + k));
    }
  }
}

DraftPass CountingModel::draft(const RevealState& state, int horizon) const {
  ++draft_calls_;
  return inner_.draft(state, horizon);
}

std::vector<ProbRow> CountingModel::target_rows(const DraftPass& pass,
                                                std::span<const Token> drafted, int from,
                                                int to) const {
  ++target_calls_;
  return inner_.target_rows(pass, drafted, from, to);
}

}  // namespace ssmd
