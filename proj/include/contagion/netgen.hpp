#pragma once

#include <cstdint>
#include <istream>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "format.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace contagion {

struct NodePopulation {
  std::vector<std::string> class_ids; // index -> label
  std::vector<int> cls;
  std::vector<int> d_in;
  std::vector<int> d_out;
  std::vector<int> theta; // d_in + 1 marks immune

  std::size_t size() const { return cls.size(); }
  bool immune(std::size_t i) const { return theta[i] > d_in[i]; }
  std::int64_t total_in() const { return std::accumulate(d_in.begin(), d_in.end(), std::int64_t{0}); }
  std::int64_t total_out() const { return std::accumulate(d_out.begin(), d_out.end(), std::int64_t{0}); }
  std::vector<std::int64_t> class_counts() const {
    std::vector<std::int64_t> c(class_ids.size(), 0);
    for (int k : cls) ++c[k];
    return c;
  }
};

struct Edge {
  std::uint32_t src;
  std::uint32_t dst;
  bool operator==(const Edge&) const = default;
};

// Edges may be a subset of the declared half-edges after percolation; the
// cascade engines only look at the edge list.
struct RealizedNetwork {
  NodePopulation pop;
  std::vector<Edge> edges;
};

namespace detail {
inline int draw_index(const std::vector<double>& cdf, Rng& rng) {
  double u = rng.uniform() * cdf.back();
  for (std::size_t k = 0; k + 1 < cdf.size(); ++k)
    if (u < cdf[k]) return static_cast<int>(k);
  // Skip trailing zero-mass atoms.
  int k = static_cast<int>(cdf.size()) - 1;
  while (k > 0 && cdf[k] == cdf[k - 1]) --k;
  return k;
}

inline std::vector<double> cumulative(const std::vector<double>& w) {
  std::vector<double> c(w.size());
  std::partial_sum(w.begin(), w.end(), c.begin());
  return c;
}
} // namespace detail

// Classes i.i.d. from the weights, then in/out totals repaired by resampling
// the class of a uniformly chosen node, then thresholds i.i.d. per class.
inline NodePopulation sample_nodes(const NetworkSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ModelError("population size must be at least 1");
  if (n > 0xffffffffULL) throw ModelError("population size exceeds 32-bit node ids");
  NodePopulation pop;
  std::vector<double> w;
  for (const auto& c : spec.classes) {
    pop.class_ids.push_back(c.id);
    w.push_back(c.weight);
  }
  const auto cdf = detail::cumulative(w);
  Rng rc(derive_seed(seed, "classes"));
  pop.cls.resize(n);
  std::int64_t diff = 0;
  for (auto& k : pop.cls) {
    k = detail::draw_index(cdf, rc);
    diff += spec.classes[k].d_in - spec.classes[k].d_out;
  }
  std::size_t attempts = 0;
  while (diff != 0) {
    if (attempts++ >= 10 * n) throw ModelError("degree total repair did not converge within 10 n attempts");
    std::size_t i = rc.below(n);
    int old = pop.cls[i];
    int k = detail::draw_index(cdf, rc);
    diff += (spec.classes[k].d_in - spec.classes[k].d_out) - (spec.classes[old].d_in - spec.classes[old].d_out);
    pop.cls[i] = k;
  }
  std::vector<std::vector<double>> tcdf;
  for (const auto& c : spec.classes) {
    std::vector<double> q(c.d_in + 2);
    for (int t = 0; t <= c.d_in + 1; ++t) q[t] = c.q(t);
    tcdf.push_back(detail::cumulative(q));
  }
  Rng rt(derive_seed(seed, "thresholds"));
  pop.d_in.resize(n);
  pop.d_out.resize(n);
  pop.theta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = spec.classes[pop.cls[i]];
    pop.d_in[i] = c.d_in;
    pop.d_out[i] = c.d_out;
    pop.theta[i] = detail::draw_index(tcdf[pop.cls[i]], rt);
  }
  return pop;
}

// Uniform perfect matching of out-half-edges to in-half-edges.
inline RealizedNetwork wire_configuration(const NodePopulation& pop, std::uint64_t seed) {
  if (pop.total_in() != pop.total_out()) throw ModelError("in/out half-edge totals differ");
  RealizedNetwork net{pop, {}};
  std::vector<std::uint32_t> outs, ins;
  outs.reserve(pop.total_out());
  ins.reserve(pop.total_in());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    outs.insert(outs.end(), pop.d_out[i], static_cast<std::uint32_t>(i));
    ins.insert(ins.end(), pop.d_in[i], static_cast<std::uint32_t>(i));
  }
  Rng rng(derive_seed(seed, "wiring"));
  rng.shuffle(ins.begin(), ins.end());
  net.edges.resize(outs.size());
  for (std::size_t k = 0; k < outs.size(); ++k) net.edges[k] = {outs[k], ins[k]};
  return net;
}

// Edge-list format:
//   n <nodes> m <edges>
//   node <id> <class> <d_in> <d_out> <theta|immune>
//   ...
//   <src> <dst>
//   ...
inline std::string write_network(const RealizedNetwork& net) {
  std::ostringstream os;
  const auto& p = net.pop;
  os << "n " << p.size() << " m " << net.edges.size() << "\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    os << "node " << i << ' ' << p.class_ids[p.cls[i]] << ' ' << p.d_in[i] << ' ' << p.d_out[i] << ' ';
    if (p.immune(i))
      os << "immune";
    else
      os << p.theta[i];
    os << "\n";
  }
  for (const auto& e : net.edges) os << e.src << ' ' << e.dst << "\n";
  return os.str();
}

inline RealizedNetwork read_network(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  RealizedNetwork net;
  std::size_t n = 0, m = 0;
  bool header = false;
  int lineno = 0;
  auto fail = [&](const std::string& msg) { throw IoError("network line " + std::to_string(lineno) + ": " + msg); };
  while (std::getline(is, line)) {
    ++lineno;
    auto t = tokenize(line);
    if (t.empty() || t[0][0] == '#') continue;
    if (!header) {
      if (t.size() != 4 || t[0] != "n" || t[2] != "m" || !parse_int(t[1], n) || !parse_int(t[3], m))
        fail("expected header 'n <nodes> m <edges>'");
      header = true;
      continue;
    }
    if (t[0] == "node") {
      std::size_t id;
      int din, dout, th;
      if (t.size() != 6 || !parse_int(t[1], id) || !parse_int(t[3], din) || !parse_int(t[4], dout))
        fail("malformed node record");
      if (id != net.pop.size()) fail("node ids must be consecutive from 0");
      if (t[5] == "immune")
        th = din + 1;
      else if (!parse_int(t[5], th) || th < 0 || th > din)
        fail("bad threshold");
      int k = -1;
      for (std::size_t c = 0; c < net.pop.class_ids.size(); ++c)
        if (net.pop.class_ids[c] == t[2]) k = static_cast<int>(c);
      if (k < 0) {
        k = static_cast<int>(net.pop.class_ids.size());
        net.pop.class_ids.push_back(t[2]);
      }
      net.pop.cls.push_back(k);
      net.pop.d_in.push_back(din);
      net.pop.d_out.push_back(dout);
      net.pop.theta.push_back(th);
      continue;
    }
    Edge e;
    if (t.size() != 2 || !parse_int(t[0], e.src) || !parse_int(t[1], e.dst)) fail("malformed edge");
    if (e.src >= n || e.dst >= n) fail("edge endpoint out of range");
    net.edges.push_back(e);
  }
  if (!header) throw IoError("network file is empty");
  if (net.pop.size() != n) throw IoError("node table size does not match header");
  if (net.edges.size() != m) throw IoError("edge count does not match header");
  return net;
}

} // namespace contagion
