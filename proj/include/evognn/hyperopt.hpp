// Copyright 2026 The evognn Authors
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

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evognn/common.hpp"

namespace evognn {

/// One tunable dimension: continuous on a linear or log axis, or a finite
/// value set.
struct HyperDim {
  enum class Kind { Uniform, LogUniform, Discrete };
  std::string name;
  Kind kind = Kind::Uniform;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> values;  // discrete only

  static HyperDim uniform(std::string name, double lo, double hi) {
    return {std::move(name), Kind::Uniform, lo, hi, {}};
  }
  static HyperDim log_uniform(std::string name, double lo, double hi) {
    return {std::move(name), Kind::LogUniform, lo, hi, {}};
  }
  static HyperDim discrete(std::string name, std::vector<double> values) {
    return {std::move(name), Kind::Discrete, 0, 0, std::move(values)};
  }
};

struct HyperparamSpace {
  std::vector<HyperDim> dims;

  /// Training-hyperparameter defaults: learning rate and weight decay on log
  /// axes, dropout linear. Epoch budget is fixed by the training loop, not
  /// tuned.
  static HyperparamSpace training_defaults() {
    HyperparamSpace s;
    s.dims.push_back(HyperDim::log_uniform("lr", 1e-4, 1e-1));
    s.dims.push_back(HyperDim::log_uniform("weight_decay", 1e-6, 1e-2));
    s.dims.push_back(HyperDim::uniform("dropout", 0.0, 0.8));
    return s;
  }

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (dims[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }
};

inline void check_space(const HyperparamSpace& space) {
  if (space.dims.empty()) throw ConfigError("hyper space: no dimensions");
  for (const HyperDim& d : space.dims) {
    if (d.kind == HyperDim::Kind::Discrete) {
      if (d.values.empty())
        throw ConfigError("hyper space: empty set for " + d.name);
    } else {
      if (!(d.lo < d.hi))
        throw ConfigError("hyper space: need lo < hi for " + d.name);
      if (d.kind == HyperDim::Kind::LogUniform && d.lo <= 0.0)
        throw ConfigError("hyper space: log axis needs lo > 0 for " + d.name);
    }
  }
}

/// One value per dimension, in space order.
using HyperPoint = std::vector<double>;

struct TrialRecord {
  HyperPoint point;
  double score = kNegInf;  // meaningful only when ok
  bool ok = false;
};

struct TpeOptions {
  double gamma = 0.25;
  int n_startup = 10;
  int n_candidates = 24;
  double bandwidth_floor_frac = 0.01;  // of the transformed axis range
};

/// Ranks ok trials and splits off the top ceil(gamma*n) as "good". Ties keep
/// trial-index order. Indices refer to the full trial list.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> tpe_split(
    const std::vector<TrialRecord>& trials, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ConfigError("tpe_split: gamma must be in (0, 1)");
  }
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].ok) ok.push_back(i);
  }
  if (ok.size() < 2) {
    throw ConfigError("tpe_split: need at least two ok trials");
  }
  std::stable_sort(ok.begin(), ok.end(), [&](std::size_t a, std::size_t b) {
    return trials[a].score > trials[b].score;
  });
  const auto n_good = static_cast<std::size_t>(
      std::ceil(gamma * static_cast<double>(ok.size())));
  std::vector<std::size_t> good(ok.begin(), ok.begin() + static_cast<long>(n_good));
  std::vector<std::size_t> bad(ok.begin() + static_cast<long>(n_good), ok.end());
  return {std::move(good), std::move(bad)};
}

namespace detail {

inline double to_axis(const HyperDim& d, double v) {
  return d.kind == HyperDim::Kind::LogUniform ? std::log(v) : v;
}

inline double from_axis(const HyperDim& d, double v) {
  return d.kind == HyperDim::Kind::LogUniform ? std::exp(v) : v;
}

inline double uniform_draw(const HyperDim& d, Rng& rng) {
  if (d.kind == HyperDim::Kind::Discrete) {
    return d.values[rng.uniform_index(d.values.size())];
  }
  // exp(log(hi)) can overshoot hi by an ulp, so clamp in the original space
  return std::clamp(from_axis(d, rng.uniform(to_axis(d, d.lo), to_axis(d, d.hi))),
                    d.lo, d.hi);
}

/// Silverman's rule with an absolute floor tied to the axis range.
inline double bandwidth(const std::vector<double>& vals, double range,
                        double floor_frac) {
  const double floor = std::max(range * floor_frac, 1e-12);
  if (vals.size() < 2) return floor;
  const double n = static_cast<double>(vals.size());
  const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / n;
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);
  std::vector<double> sorted = vals;
  std::sort(sorted.begin(), sorted.end());
  const double q1 = sorted[static_cast<std::size_t>(0.25 * (n - 1))];
  const double q3 = sorted[static_cast<std::size_t>(0.75 * (n - 1))];
  const double spread = std::min(sd, (q3 - q1) / 1.34);
  const double bw = 0.9 * spread * std::pow(n, -0.2);
  return std::max(bw, floor);
}

inline double kde_log_pdf(double x, const std::vector<double>& centers,
                          double bw) {
  // log of the mean of Gaussians, computed via log-sum-exp
  double best = kNegInf;
  std::vector<double> exponents;
  exponents.reserve(centers.size());
  for (double c : centers) {
    const double z = (x - c) / bw;
    const double e = -0.5 * z * z;
    exponents.push_back(e);
    best = std::max(best, e);
  }
  double sum = 0.0;
  for (double e : exponents) sum += std::exp(e - best);
  return best + std::log(sum) -
         std::log(static_cast<double>(centers.size())) -
         std::log(bw * std::sqrt(2.0 * 3.141592653589793238462643383279502884));
}

inline double smoothed_log_freq(double value, const std::vector<double>& observed,
                                const std::vector<double>& categories) {
  double count = 0.0;
  for (double o : observed) {
    if (o == value) count += 1.0;
  }
  return std::log((count + 1.0) /
                  (static_cast<double>(observed.size()) +
                   static_cast<double>(categories.size())));
}

}  // namespace detail

/// One TPE suggestion: uniform while fewer than n_startup ok trials exist,
/// otherwise draw candidates from the good-trial density l and return the one
/// maximizing l(x)/g(x). Densities are per-dimension: Gaussian KDE on the
/// (log-)axis for continuous dimensions, add-one-smoothed frequencies for
/// discrete ones.
inline HyperPoint suggest(const std::vector<TrialRecord>& trials,
                          const HyperparamSpace& space, Rng& rng,
                          const TpeOptions& opts = {}) {
  check_space(space);
  std::size_t n_ok = 0;
  for (const TrialRecord& t : trials) n_ok += t.ok;
  if (n_ok < static_cast<std::size_t>(opts.n_startup) || n_ok < 2) {
    HyperPoint p;
    for (const HyperDim& d : space.dims) p.push_back(detail::uniform_draw(d, rng));
    return p;
  }

  auto [good_idx, bad_idx] = tpe_split(trials, opts.gamma);
  const std::size_t ndims = space.dims.size();
  std::vector<std::vector<double>> good_vals(ndims), bad_vals(ndims);
  for (std::size_t d = 0; d < ndims; ++d) {
    const bool log_axis = space.dims[d].kind == HyperDim::Kind::LogUniform;
    for (std::size_t i : good_idx) {
      const double v = trials[i].point[d];
      good_vals[d].push_back(log_axis ? std::log(v) : v);
    }
    for (std::size_t i : bad_idx) {
      const double v = trials[i].point[d];
      bad_vals[d].push_back(log_axis ? std::log(v) : v);
    }
  }

  std::vector<double> bw_good(ndims), bw_bad(ndims);
  for (std::size_t d = 0; d < ndims; ++d) {
    const HyperDim& dim = space.dims[d];
    if (dim.kind == HyperDim::Kind::Discrete) continue;
    const double range = detail::to_axis(dim, dim.hi) - detail::to_axis(dim, dim.lo);
    bw_good[d] = detail::bandwidth(good_vals[d], range, opts.bandwidth_floor_frac);
    bw_bad[d] = detail::bandwidth(bad_vals[d], range, opts.bandwidth_floor_frac);
  }

  HyperPoint best_point;
  double best_ratio = kNegInf;
  for (int c = 0; c < opts.n_candidates; ++c) {
    HyperPoint candidate(ndims);
    double ratio = 0.0;
    for (std::size_t d = 0; d < ndims; ++d) {
      const HyperDim& dim = space.dims[d];
      if (dim.kind == HyperDim::Kind::Discrete) {
        // draw from the smoothed good distribution
        const double k = static_cast<double>(dim.values.size());
        const double n = static_cast<double>(good_vals[d].size());
        double pick = rng.uniform() * (n + k);
        double chosen = dim.values.back();
        for (double v : dim.values) {
          double weight = 1.0;
          for (double o : good_vals[d]) {
            if (o == v) weight += 1.0;
          }
          if (pick < weight) {
            chosen = v;
            break;
          }
          pick -= weight;
        }
        candidate[d] = chosen;
        ratio += detail::smoothed_log_freq(chosen, good_vals[d], dim.values) -
                 detail::smoothed_log_freq(chosen, bad_vals[d], dim.values);
      } else {
        const double lo = detail::to_axis(dim, dim.lo);
        const double hi = detail::to_axis(dim, dim.hi);
        const double center =
            good_vals[d][rng.uniform_index(good_vals[d].size())];
        double x = center + rng.normal() * bw_good[d];
        x = std::clamp(x, lo, hi);
        candidate[d] = std::clamp(detail::from_axis(dim, x), dim.lo, dim.hi);
        ratio += detail::kde_log_pdf(x, good_vals[d], bw_good[d]) -
                 detail::kde_log_pdf(x, bad_vals[d], bw_bad[d]);
      }
    }
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_point = std::move(candidate);
    }
  }
  return best_point;
}

/// Objective outcome: a score (higher better) or failure.
using Objective = std::function<std::optional<double>(const HyperPoint&)>;

struct TuneResult {
  TrialRecord best;
  std::size_t best_index = 0;
  std::vector<TrialRecord> trials;
};

/// suggest -> evaluate loop. Failed objective calls are recorded, never
/// retried; the best ok trial wins with ties going to the earliest.
inline TuneResult tune(const Objective& objective, const HyperparamSpace& space,
                       int max_trials, Rng& rng, const TpeOptions& opts = {}) {
  check_space(space);
  if (max_trials < 1) throw ConfigError("tune: max_trials must be >= 1");
  TuneResult result;
  for (int i = 0; i < max_trials; ++i) {
    TrialRecord record;
    record.point = suggest(result.trials, space, rng, opts);
    if (std::optional<double> score = objective(record.point)) {
      record.ok = true;
      record.score = *score;
    }
    result.trials.push_back(std::move(record));
  }
  bool found = false;
  for (std::size_t i = 0; i < result.trials.size(); ++i) {
    const TrialRecord& t = result.trials[i];
    if (t.ok && (!found || t.score > result.best.score)) {
      result.best = t;
      result.best_index = i;
      found = true;
    }
  }
  if (!found) throw TuningError("tune: every trial failed");
  return result;
}

// --- serialization (trial logs) -----------------------------------------------

inline nlohmann::ordered_json trial_to_json(const TrialRecord& t,
                                            const HyperparamSpace& space) {
  nlohmann::ordered_json j;
  auto& point = j["point"] = nlohmann::ordered_json::object();
  for (std::size_t d = 0; d < space.dims.size(); ++d) {
    point[space.dims[d].name] = t.point[d];
  }
  j["ok"] = t.ok;
  if (t.ok) j["score"] = t.score;
  return j;
}

inline nlohmann::ordered_json space_to_json(const HyperparamSpace& space) {
  nlohmann::ordered_json dims = nlohmann::ordered_json::array();
  for (const HyperDim& d : space.dims) {
    nlohmann::ordered_json j;
    j["name"] = d.name;
    switch (d.kind) {
      case HyperDim::Kind::Uniform:
        j["kind"] = "uniform";
        j["lo"] = d.lo;
        j["hi"] = d.hi;
        break;
      case HyperDim::Kind::LogUniform:
        j["kind"] = "log_uniform";
        j["lo"] = d.lo;
        j["hi"] = d.hi;
        break;
      case HyperDim::Kind::Discrete:
        j["kind"] = "discrete";
        j["values"] = d.values;
        break;
    }
    dims.push_back(std::move(j));
  }
  return dims;
}

inline HyperparamSpace space_from_json(const nlohmann::json& dims) {
  HyperparamSpace space;
  for (const auto& j : dims) {
    HyperDim d;
    d.name = j.at("name").get<std::string>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "uniform") {
      d.kind = HyperDim::Kind::Uniform;
      d.lo = j.at("lo").get<double>();
      d.hi = j.at("hi").get<double>();
    } else if (kind == "log_uniform") {
      d.kind = HyperDim::Kind::LogUniform;
      d.lo = j.at("lo").get<double>();
      d.hi = j.at("hi").get<double>();
    } else if (kind == "discrete") {
      d.kind = HyperDim::Kind::Discrete;
      d.lo = d.hi = 0.0;
      d.values = j.at("values").get<std::vector<double>>();
    } else {
      throw FormatError("hyper space: unknown dimension kind '" + kind + "'");
    }
    space.dims.push_back(std::move(d));
  }
  check_space(space);
  return space;
}

}  // namespace evognn
