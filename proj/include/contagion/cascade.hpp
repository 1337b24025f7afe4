#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "format.hpp"
#include "netgen.hpp"
#include "rng.hpp"

namespace contagion {

// (class index, theta, ell) with ell the defaulted in-neighbor count.
using CellKey = std::tuple<int, int, int>;
using CellCounts = std::map<CellKey, std::int64_t>;

struct CascadeResult {
  std::vector<char> defaulted;
  std::vector<int> default_round; // -1 for survivors
  int rounds = 0;                 // first k with D_k = D_{k-1}
  std::vector<int> dead;          // defaulted in-neighbors, with multiplicity
  CellCounts cells;               // solvent nodes only

  std::int64_t default_count() const {
    std::int64_t s = 0;
    for (char d : defaulted) s += d;
    return s;
  }
  // D_k as a membership mask.
  std::vector<char> round_set(int k) const {
    std::vector<char> m(defaulted.size(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = default_round[i] >= 0 && default_round[i] <= k;
    return m;
  }
};

namespace detail {
struct OutAdjacency {
  std::vector<std::uint32_t> offset, target;
  explicit OutAdjacency(const RealizedNetwork& net) : offset(net.pop.size() + 1, 0), target(net.edges.size()) {
    for (const auto& e : net.edges) ++offset[e.src + 1];
    for (std::size_t i = 1; i < offset.size(); ++i) offset[i] += offset[i - 1];
    std::vector<std::uint32_t> pos(offset.begin(), offset.end() - 1);
    for (const auto& e : net.edges) target[pos[e.src]++] = e.dst;
  }
};

inline CellCounts solvent_cells(const NodePopulation& pop, const std::vector<char>& defaulted,
                                const std::vector<int>& dead) {
  CellCounts cells;
  for (std::size_t i = 0; i < pop.size(); ++i)
    if (!defaulted[i]) ++cells[{pop.cls[i], pop.theta[i], dead[i]}];
  return cells;
}
} // namespace detail

// Round-based threshold cascade; multi-edges count with multiplicity.
inline CascadeResult run_discrete(const RealizedNetwork& net) {
  const auto& pop = net.pop;
  const std::size_t n = pop.size();
  detail::OutAdjacency adj(net);
  CascadeResult res;
  res.defaulted.assign(n, 0);
  res.default_round.assign(n, -1);
  std::vector<int> hits(n, 0);
  std::vector<std::uint32_t> frontier, next;
  for (std::size_t i = 0; i < n; ++i)
    if (pop.theta[i] == 0) {
      res.defaulted[i] = 1;
      res.default_round[i] = 0;
      frontier.push_back(static_cast<std::uint32_t>(i));
    }
  int k = 0;
  while (true) {
    ++k;
    next.clear();
    for (auto u : frontier)
      for (auto p = adj.offset[u]; p < adj.offset[u + 1]; ++p) {
        auto v = adj.target[p];
        if (++hits[v] >= pop.theta[v] && !res.defaulted[v]) {
          res.defaulted[v] = 1;
          res.default_round[v] = k;
          next.push_back(v);
        }
      }
    if (next.empty()) break;
    frontier.swap(next);
  }
  res.rounds = k;
  res.cells = detail::solvent_cells(pop, res.defaulted, hits);
  res.dead = std::move(hits);
  return res;
}

enum class TimeMode { exponential, sequential };

struct TrajectoryRecord {
  std::int64_t event;
  double time;
  std::int64_t W, S, D, Hplus, Iplus;
};

struct CellChange {
  std::int64_t event;
  int cls, theta, ell;
  std::int64_t count;
};

struct CascadeTrajectory {
  std::vector<TrajectoryRecord> records;
  std::vector<CellChange> cell_changes; // initial cells at event 0, then changes
  std::int64_t tau_star = 0;            // index of the stopping event
  std::vector<char> defaulted;
  std::vector<int> dead; // dead in-balls per node at the stop
  CellCounts cells;      // final solvent cells

  // Last record with time <= t.
  const TrajectoryRecord& at_time(double t) const {
    std::size_t lo = 0, hi = records.size();
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      if (records[mid].time <= t)
        lo = mid;
      else
        hi = mid;
    }
    return records[lo];
  }
};

struct DeathProcessOptions {
  TimeMode time_mode = TimeMode::exponential;
  bool record_cells = false;
};

// Balls-and-bins death process on a fixed graph. The in-ball killed at each
// event is the partner of the current red out-ball; white balls are drawn
// uniformly by swap-remove.
inline CascadeTrajectory run_death_process(const RealizedNetwork& net, std::uint64_t seed,
                                           DeathProcessOptions opt = {}) {
  const auto& pop = net.pop;
  const std::size_t n = pop.size();
  Rng rng(derive_seed(seed, "death-process"));
  detail::OutAdjacency adj(net);
  std::vector<int> in_deg(n, 0);
  for (const auto& e : net.edges) ++in_deg[e.dst];

  CascadeTrajectory tr;
  tr.defaulted.assign(n, 0);
  tr.dead.assign(n, 0);
  std::vector<std::uint32_t> white; // out-edge targets awaiting pairing
  std::int64_t S = 0, D = 0, H = 0, I = 0;
  std::int64_t alive = static_cast<std::int64_t>(net.edges.size());
  CellCounts cells;

  auto push_out = [&](std::uint32_t u) {
    for (auto p = adj.offset[u]; p < adj.offset[u + 1]; ++p) white.push_back(adj.target[p]);
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (pop.theta[i] == 0) {
      tr.defaulted[i] = 1;
      ++D;
      I += in_deg[i];
      push_out(static_cast<std::uint32_t>(i));
    } else {
      ++S;
      H += in_deg[i];
      ++cells[{pop.cls[i], pop.theta[i], 0}];
    }
  }
  if (opt.record_cells)
    for (const auto& [key, cnt] : cells)
      tr.cell_changes.push_back({0, std::get<0>(key), std::get<1>(key), std::get<2>(key), cnt});

  auto cell_add = [&](std::int64_t ev, int c, int th, int l, std::int64_t delta) {
    auto& v = cells[{c, th, l}];
    v += delta;
    if (opt.record_cells) tr.cell_changes.push_back({ev, c, th, l, v});
    if (v == 0) cells.erase({c, th, l});
  };

  double time = 0.0;
  std::int64_t ev = 0;
  auto recolor = [&]() -> std::int64_t {
    if (white.empty()) return -1;
    std::size_t j = rng.below(white.size());
    std::swap(white[j], white.back());
    return static_cast<std::int64_t>(white.size()) - 1;
  };
  std::int64_t W = recolor();
  tr.records.push_back({0, 0.0, W, S, D, H, I});
  while (W >= 0) {
    ++ev;
    time = opt.time_mode == TimeMode::exponential ? time + rng.exponential(static_cast<double>(alive))
                                                  : static_cast<double>(ev);
    std::uint32_t v = white.back();
    white.pop_back();
    --alive;
    if (tr.defaulted[v]) {
      --I;
    } else {
      int l = tr.dead[v]++;
      --H;
      const int c = pop.cls[v], th = pop.theta[v];
      cell_add(ev, c, th, l, -1);
      if (tr.dead[v] >= th) {
        tr.defaulted[v] = 1;
        --S;
        ++D;
        std::int64_t rest = in_deg[v] - tr.dead[v];
        H -= rest;
        I += rest;
        push_out(v);
      } else {
        cell_add(ev, c, th, l + 1, +1);
      }
    }
    W = recolor();
    tr.records.push_back({ev, time, W, S, D, H, I});
  }
  tr.tau_star = ev;
  // Dead counts of defaulted nodes stop being tracked at default; report the
  // number of processed in-edges instead so the array means the same for all.
  for (std::size_t i = 0; i < n; ++i) tr.dead[i] = 0;
  for (const auto& e : net.edges)
    if (tr.defaulted[e.src]) ++tr.dead[e.dst];
  tr.cells = cells;
  return tr;
}

inline std::string trajectory_csv(const CascadeTrajectory& tr) {
  std::string s = "event,time,W,S,D,Hplus,Iplus\n";
  for (const auto& r : tr.records)
    s += std::to_string(r.event) + "," + fmt17(r.time) + "," + std::to_string(r.W) + "," + std::to_string(r.S) + "," +
         std::to_string(r.D) + "," + std::to_string(r.Hplus) + "," + std::to_string(r.Iplus) + "\n";
  return s;
}

// theta = d_in + 1 in the theta column means immune.
inline std::string cell_changes_csv(const CascadeTrajectory& tr, const std::vector<std::string>& class_ids) {
  std::string s = "event,class,theta,ell,count\n";
  for (const auto& c : tr.cell_changes)
    s += std::to_string(c.event) + "," + class_ids[c.cls] + "," + std::to_string(c.theta) + "," +
         std::to_string(c.ell) + "," + std::to_string(c.count) + "\n";
  return s;
}

} // namespace contagion
