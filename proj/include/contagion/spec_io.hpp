#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "format.hpp"
#include "model.hpp"

// Text schema, one record per line, '#' starts a comment:
//
//   class id=<label> d_in=<int> d_out=<int> weight=<real> pmf=<r0,...,r_d_in> immune=<real>
//         [weight_n=<real>] [pmf_n=<list>] [immune_n=<real>]
//   gamma_bar=<real>
//   loss id=<label> default=<real> link=<real>
//        [default_var=<real> | default_values=<list> default_probs=<list>]
//        [link_var=<real>    | link_values=<list>    link_probs=<list>]
//
// Network and risk records may share a file; each parser ignores the other's
// records.

namespace contagion {

namespace detail {

struct Record {
  int line = 0;
  std::string kind;
  std::map<std::string, std::string> kv;
};

inline std::vector<Record> read_records(const std::string& text) {
  std::vector<Record> out;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    auto toks = tokenize(raw);
    if (toks.empty()) continue;
    Record r;
    r.line = lineno;
    std::size_t first = 0;
    if (toks[0].find('=') == std::string::npos) {
      r.kind = toks[0];
      first = 1;
    }
    for (std::size_t i = first; i < toks.size(); ++i) {
      auto eq = toks[i].find('=');
      if (eq == std::string::npos || eq == 0)
        throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" + toks[i] + "'");
      std::string key = toks[i].substr(0, eq);
      if (r.kv.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
      r.kv[key] = toks[i].substr(eq + 1);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string where(const Record& r) { return "line " + std::to_string(r.line) + ": "; }

inline const std::string& need(const Record& r, const std::string& key) {
  auto it = r.kv.find(key);
  if (it == r.kv.end()) throw ConfigError(where(r) + "missing key '" + key + "'");
  return it->second;
}

inline double to_real(const Record& r, const std::string& key, const std::string& v) {
  double d;
  if (!parse_double(v, d)) throw ConfigError(where(r) + "key '" + key + "' is not a number: '" + v + "'");
  return d;
}

inline int to_int(const Record& r, const std::string& key, const std::string& v) {
  int d;
  if (!parse_int(v, d)) throw ConfigError(where(r) + "key '" + key + "' is not an integer: '" + v + "'");
  return d;
}

inline std::vector<double> to_list(const Record& r, const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& p : split(v, ',')) out.push_back(to_real(r, key, p));
  return out;
}

inline void only_keys(const Record& r, std::initializer_list<const char*> allowed) {
  for (const auto& kv : r.kv) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || kv.first == a;
    if (!ok) throw ConfigError(where(r) + "unknown key '" + kv.first + "'");
  }
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_shortest(v[i]);
  return s;
}

} // namespace detail

inline NetworkSpec parse_network_spec(const std::string& text) {
  NetworkSpec spec;
  for (const auto& r : detail::read_records(text)) {
    if (r.kind != "class") continue;
    detail::only_keys(r, {"id", "d_in", "d_out", "weight", "pmf", "immune", "weight_n", "pmf_n", "immune_n"});
    Characteristic c;
    c.id = detail::need(r, "id");
    c.d_in = detail::to_int(r, "d_in", detail::need(r, "d_in"));
    c.d_out = detail::to_int(r, "d_out", detail::need(r, "d_out"));
    c.weight = detail::to_real(r, "weight", detail::need(r, "weight"));
    c.threshold_pmf = detail::to_list(r, "pmf", detail::need(r, "pmf"));
    if (r.kv.count("immune")) c.immune_mass = detail::to_real(r, "immune", r.kv.at("immune"));
    if (r.kv.count("weight_n")) c.weight_n = detail::to_real(r, "weight_n", r.kv.at("weight_n"));
    if (r.kv.count("pmf_n")) c.threshold_pmf_n = detail::to_list(r, "pmf_n", r.kv.at("pmf_n"));
    if (r.kv.count("immune_n")) c.immune_mass_n = detail::to_real(r, "immune_n", r.kv.at("immune_n"));
    spec.classes.push_back(std::move(c));
  }
  if (spec.classes.empty()) throw ConfigError("no class records found");
  return spec;
}

inline std::string write_network_spec(const NetworkSpec& spec) {
  std::string out;
  for (const auto& c : spec.classes) {
    out += "class id=" + c.id + " d_in=" + std::to_string(c.d_in) + " d_out=" + std::to_string(c.d_out) +
           " weight=" + fmt_shortest(c.weight) + " pmf=" + detail::join(c.threshold_pmf) +
           " immune=" + fmt_shortest(c.immune_mass);
    if (c.weight_n) out += " weight_n=" + fmt_shortest(*c.weight_n);
    if (c.threshold_pmf_n) out += " pmf_n=" + detail::join(*c.threshold_pmf_n);
    if (c.immune_mass_n) out += " immune_n=" + fmt_shortest(*c.immune_mass_n);
    out += "\n";
  }
  return out;
}

inline RiskSpec parse_risk_spec(const std::string& text) {
  RiskSpec risk;
  bool have_gamma = false;
  for (const auto& r : detail::read_records(text)) {
    if (r.kind.empty()) {
      detail::only_keys(r, {"gamma_bar"});
      risk.gamma_bar = detail::to_real(r, "gamma_bar", detail::need(r, "gamma_bar"));
      have_gamma = true;
    } else if (r.kind == "loss") {
      detail::only_keys(r, {"id", "default", "link", "default_var", "link_var", "default_values", "default_probs",
                            "link_values", "link_probs"});
      ClassLoss l;
      std::string id = detail::need(r, "id");
      if (r.kv.count("default")) l.default_loss = detail::to_real(r, "default", r.kv.at("default"));
      if (r.kv.count("link")) l.link_loss = detail::to_real(r, "link", r.kv.at("link"));
      auto dist = [&](const char* var, const char* vals, const char* probs, double mean) -> std::optional<LossDistribution> {
        bool has_var = r.kv.count(var), has_vals = r.kv.count(vals), has_probs = r.kv.count(probs);
        if (has_var && (has_vals || has_probs))
          throw ConfigError(detail::where(r) + "give either '" + var + "' or an explicit pmf, not both");
        if (has_vals != has_probs) throw ConfigError(detail::where(r) + "'" + vals + "' and '" + probs + "' go together");
        if (has_var) return LossDistribution::two_point(mean, detail::to_real(r, var, r.kv.at(var)));
        if (has_vals)
          return LossDistribution{detail::to_list(r, vals, r.kv.at(vals)), detail::to_list(r, probs, r.kv.at(probs))};
        return std::nullopt;
      };
      l.default_dist = dist("default_var", "default_values", "default_probs", l.default_loss);
      l.link_dist = dist("link_var", "link_values", "link_probs", l.link_loss);
      if (risk.losses.count(id)) throw ConfigError(detail::where(r) + "duplicate loss record for class '" + id + "'");
      risk.losses[id] = l;
    }
  }
  if (!have_gamma) throw ConfigError("risk spec lacks gamma_bar");
  return risk;
}

inline std::string write_risk_spec(const RiskSpec& risk) {
  std::string out = "gamma_bar=" + fmt_shortest(risk.gamma_bar) + "\n";
  for (const auto& [id, l] : risk.losses) {
    out += "loss id=" + id + " default=" + fmt_shortest(l.default_loss) + " link=" + fmt_shortest(l.link_loss);
    if (l.default_dist)
      out += " default_values=" + detail::join(l.default_dist->values) + " default_probs=" + detail::join(l.default_dist->probs);
    if (l.link_dist)
      out += " link_values=" + detail::join(l.link_dist->values) + " link_probs=" + detail::join(l.link_dist->probs);
    out += "\n";
  }
  return out;
}

} // namespace contagion
