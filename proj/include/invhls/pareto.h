// Copyright 2026 The invhls Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef INVHLS_PARETO_H_
#define INVHLS_PARETO_H_

// Pareto fronts over (latency, area) and the average distance from a
// reference set.

#include <span>
#include <string>
#include <vector>

namespace invhls {

struct ObjectivePoint {
  double latency = 0.0;
  double area = 0.0;
  std::string key;

  bool operator==(const ObjectivePoint&) const = default;
};

// p dominates q when p <= q in both objectives and p < q in at least one.
bool Dominates(const ObjectivePoint& p, const ObjectivePoint& q);

// Non-dominated subset sorted by latency; exact objective duplicates keep the
// lexicographically smallest key. Throws ValidationError on empty input.
std::vector<ObjectivePoint> ParetoExtract(std::span<const ObjectivePoint> points);

// mean over g in reference of min over w in approx of
// max(|a_w - a_g| / a_g, |l_w - l_g| / l_g).
double Adrs(std::span<const ObjectivePoint> reference, std::span<const ObjectivePoint> approx);

std::vector<ObjectivePoint> ReferenceFront(
    std::span<const std::vector<ObjectivePoint>> fronts);

// CSV with header key,latency,area.
std::string FrontToCsv(std::span<const ObjectivePoint> front);
std::vector<ObjectivePoint> FrontFromCsv(const std::string& text);

}  // namespace invhls

#endif  // INVHLS_PARETO_H_
