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

#include "invhls/pareto.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "invhls/errors.h"

namespace invhls {

bool Dominates(const ObjectivePoint& p, const ObjectivePoint& q) {
  return p.latency <= q.latency && p.area <= q.area &&
         (p.latency < q.latency || p.area < q.area);
}

std::vector<ObjectivePoint> ParetoExtract(std::span<const ObjectivePoint> points) {
  if (points.empty()) throw ValidationError("pareto: empty point set");
  std::vector<ObjectivePoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const ObjectivePoint& a, const ObjectivePoint& b) {
    if (a.latency != b.latency) return a.latency < b.latency;
    if (a.area != b.area) return a.area < b.area;
    return a.key < b.key;
  });
  std::vector<ObjectivePoint> front;
  double best_area = std::numeric_limits<double>::infinity();
  for (const ObjectivePoint& p : sorted) {
    // Sorted by latency then area: p survives iff its area beats everything
    // of lower-or-equal latency seen so far.
    if (p.area < best_area) {
      front.push_back(p);
      best_area = p.area;
    }
  }
  return front;
}

double Adrs(std::span<const ObjectivePoint> reference, std::span<const ObjectivePoint> approx) {
  if (reference.empty() || approx.empty()) throw ValidationError("adrs: empty front");
  double total = 0.0;
  for (const ObjectivePoint& g : reference) {
    if (!(g.latency > 0.0) || !(g.area > 0.0)) {
      throw ValidationError("adrs: reference coordinates must be positive");
    }
    double best = std::numeric_limits<double>::infinity();
    for (const ObjectivePoint& w : approx) {
      const double d = std::max(std::abs(w.area - g.area) / g.area,
                                std::abs(w.latency - g.latency) / g.latency);
      best = std::min(best, d);
    }
    total += best;
  }
  return total / double(reference.size());
}

std::vector<ObjectivePoint> ReferenceFront(std::span<const std::vector<ObjectivePoint>> fronts) {
  std::vector<ObjectivePoint> all;
  for (const auto& f : fronts) all.insert(all.end(), f.begin(), f.end());
  if (all.empty()) throw ValidationError("reference front: every input set is empty");
  return ParetoExtract(all);
}

std::string FrontToCsv(std::span<const ObjectivePoint> front) {
  std::ostringstream out;
  out.precision(17);
  out << "key,latency,area\n";
  for (const ObjectivePoint& p : front) out << p.key << ',' << p.latency << ',' << p.area << '\n';
  return out.str();
}

std::vector<ObjectivePoint> FrontFromCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<ObjectivePoint> out;
  if (!std::getline(in, line) || line != "key,latency,area") {
    throw ValidationError("front csv: missing header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c2 = line.rfind(',');
    const auto c1 = c2 == std::string::npos ? c2 : line.rfind(',', c2 - 1);
    if (c1 == std::string::npos) throw ValidationError("front csv: bad row '" + line + "'");
    try {
      out.push_back({std::stod(line.substr(c1 + 1, c2 - c1 - 1)), std::stod(line.substr(c2 + 1)),
                     line.substr(0, c1)});
    } catch (const std::exception&) {
      throw ValidationError("front csv: bad number in '" + line + "'");
    }
  }
  return out;
}

}  // namespace invhls
