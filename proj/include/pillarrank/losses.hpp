// Copyright 2026 The pillarrank Authors
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

#include <span>
#include <vector>

#include "pillarrank/autodiff.hpp"

namespace pillarrank {

// Plain evaluations over a score vector. `positive` marks ground-truth
// matches among the K neighbors.

/// -log( sum_{P} exp(s/tau) / sum_{all} exp(s/tau) ). Requires >= 1 positive.
double contrastive_loss(std::span<const double> scores, const std::vector<bool>& positive,
                        double tau);

/// sum over negatives of max(0, margin - s_hat + s_i), s_hat the lowest
/// positive score. Zero when there are no negatives.
double triplet_loss(std::span<const double> scores, const std::vector<bool>& positive,
                    double margin);

/// KL( softmax(a/tau) || softmax(b/tau) ).
double alignment_loss(std::span<const double> query_scores,
                      std::span<const double> mirrored_scores, double tau);

std::vector<double> softmax(std::span<const double> x, double tau = 1.0);

namespace ad {

// Tape versions of the same losses; inputs are 1xK score rows.
Var contrastive_loss(Tape& t, Var scores, const std::vector<bool>& positive, double tau);
Var triplet_loss(Tape& t, Var scores, const std::vector<bool>& positive, double margin);
Var alignment_loss(Tape& t, Var query_scores, Var mirrored_scores, double tau);

}  // namespace ad
}  // namespace pillarrank
