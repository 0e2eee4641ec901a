#ifndef FMLOC_RUNNER_CONFIG_HPP
#define FMLOC_RUNNER_CONFIG_HPP

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fmloc/core/error.hpp"
#include "fmloc/disorder.hpp"
#include "fmloc/estimators.hpp"
#include "fmloc/model.hpp"
#include "fmloc/topology.hpp"

namespace fmloc::runner {

using json = nlohmann::json;

inline constexpr std::array<const char*, 6> kKinds{"decay",      "wegner",    "ids",
                                                    "correlator", "dynamical", "inequalities"};

/// Parsed experiment. `document` keeps the JSON as loaded (plus CLI
/// overrides); everything else is derived from it.
struct ExperimentConfig {
  std::string kind;
  json document;
  Ensemble ensemble;
  json estimator = json::object();
  std::uint64_t master_seed = 0;
  std::size_t samples = 0;
  std::size_t workers = 1;
  std::string output = "out";
};

// ---------------------------------------------------------------------------
// Scalars. Config numbers are integers or strings: "p/q", decimal or
// exponent notation, "inf". JSON floats are rejected so the canonical form
// does not depend on float printing.

inline double parse_rational(const json& v, const std::string& path) {
  if (v.is_number_integer()) return static_cast<double>(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return static_cast<double>(v.get<std::uint64_t>());
  if (!v.is_string()) throw ConfigError("expected an integer or a rational string", path);
  const std::string s = v.get<std::string>();
  if (s == "inf" || s == "+inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  auto number = [&](const std::string& t) {
    if (t.empty()) throw ConfigError("empty number", path);
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(x))
      throw ConfigError("cannot parse '" + s + "' as a number", path);
    return x;
  };
  const auto slash = s.find('/');
  if (slash == std::string::npos) return number(s);
  const double q = number(s.substr(slash + 1));
  if (q == 0.0) throw ConfigError("zero denominator in '" + s + "'", path);
  return number(s.substr(0, slash)) / q;
}

inline void reject_floats(const json& v, const std::string& path) {
  if (v.is_number_float())
    throw ConfigError("floating-point literals are not allowed; write a string such as \"1/3\"",
                      path.empty() ? "<root>" : path);
  if (v.is_object())
    for (const auto& [k, x] : v.items()) reject_floats(x, path.empty() ? k : path + "." + k);
  if (v.is_array())
    for (std::size_t i = 0; i < v.size(); ++i) reject_floats(v[i], path + "[" + std::to_string(i) + "]");
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError("missing field", path + "." + key);
  return obj.at(key);
}

inline double rational_field(const json& obj, const std::string& key, const std::string& path) {
  return parse_rational(require(obj, key, path), path + "." + key);
}

inline double rational_field(const json& obj, const std::string& key, const std::string& path,
                             double fallback) {
  if (!obj.contains(key)) return fallback;
  return parse_rational(obj.at(key), path + "." + key);
}

inline std::uint64_t integer_field(const json& obj, const std::string& key, const std::string& path,
                                   std::optional<std::uint64_t> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("missing field", path + "." + key);
  }
  const auto& v = obj.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  throw ConfigError("expected a non-negative integer", path + "." + key);
}

inline std::vector<double> rational_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError("expected an array", path);
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(parse_rational(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<std::int64_t> offset_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError("expected an integer array", path);
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_integer()) throw ConfigError("expected an integer", path + "[" + std::to_string(i) + "]");
    out.push_back(v[i].get<std::int64_t>());
  }
  return out;
}

/// Rows of entries; an entry is a rational or a [re, im] pair.
inline CMatrix matrix_field(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty() || !v[0].is_array()) throw ConfigError("expected a matrix", path);
  const std::size_t n = v.size(), m = v[0].size();
  CMatrix out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    if (!v[i].is_array() || v[i].size() != m) throw ConfigError("ragged matrix", path);
    for (std::size_t j = 0; j < m; ++j) {
      const auto& e = v[i][j];
      const std::string p = path + "[" + std::to_string(i) + "][" + std::to_string(j) + "]";
      if (e.is_array()) {
        if (e.size() != 2) throw ConfigError("complex entries are [re, im]", p);
        out(i, j) = cplx(parse_rational(e[0], p), parse_rational(e[1], p));
      } else {
        out(i, j) = parse_rational(e, p);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Blocks

inline ModelSpec parse_model(const json& m) {
  const std::string path = "model";
  const std::string variant = require(m, "variant", path).get<std::string>();
  const double g = rational_field(m, "g", path);
  if (variant == "anderson") return anderson_model(g);
  if (variant == "spencer") return spencer_model(rational_field(m, "a", path), g);
  if (variant == "b1prime") return b1prime_example_model(g);
  if (variant == "block") {
    std::vector<HoppingTerm> hop;
    if (m.contains("hopping")) {
      const auto& h = m.at("hopping");
      for (std::size_t i = 0; i < h.size(); ++i) {
        const std::string p = path + ".hopping[" + std::to_string(i) + "]";
        hop.push_back({offset_list(require(h[i], "offset", p), p + ".offset"),
                       matrix_field(require(h[i], "kernel", p), p + ".kernel")});
      }
    }
    return block_model(matrix_field(require(m, "A", path), "model.A"),
                       matrix_field(require(m, "B", path), "model.B"), g, std::move(hop));
  }
  if (variant == "alloy") {
    std::vector<AlloyTerm> terms;
    const auto& t = require(m, "terms", path);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::string p = path + ".terms[" + std::to_string(i) + "]";
      terms.push_back({offset_list(require(t[i], "offset", p), p + ".offset"), rational_field(t[i], "coeff", p)});
    }
    return alloy_model(std::move(terms), g);
  }
  throw ConfigError("unknown variant '" + variant + "'", "model.variant");
}

inline GraphTopology parse_topology(const json& t) {
  const std::string path = "topology";
  const std::string type = t.value("type", std::string("lattice"));
  if (type == "lattice") {
    const auto d = integer_field(t, "d", path);
    std::vector<std::size_t> sides;
    for (auto x : offset_list(require(t, "sides", path), "topology.sides")) {
      if (x < 1) throw ConfigError("sides must be >= 1", "topology.sides");
      sides.push_back(static_cast<std::size_t>(x));
    }
    return make_lattice_box(d, sides, t.value("periodic", false));
  }
  if (type == "graph") {
    const auto n = integer_field(t, "vertices", path);
    std::vector<std::pair<Vertex, Vertex>> edges;
    const auto& e = require(t, "edges", path);
    for (std::size_t i = 0; i < e.size(); ++i) {
      const auto pair = offset_list(e[i], "topology.edges[" + std::to_string(i) + "]");
      if (pair.size() != 2 || pair[0] < 0 || pair[1] < 0)
        throw ConfigError("edges are [x, y] pairs", "topology.edges[" + std::to_string(i) + "]");
      edges.emplace_back(static_cast<Vertex>(pair[0]), static_cast<Vertex>(pair[1]));
    }
    return GraphTopology::from_edges(n, edges);
  }
  throw ConfigError("unknown topology type '" + type + "'", "topology.type");
}

inline DisorderSpec parse_disorder(const json& d) {
  return make_spec(require(d, "family", "disorder").get<std::string>(),
                   rational_list(require(d, "params", "disorder"), "disorder.params"));
}

/// Validates and parses a config document. Type errors inside the JSON
/// library surface as ConfigError as well.
inline ExperimentConfig parse_config(json doc) {
  reject_floats(doc, "");
  if (!doc.is_object()) throw ConfigError("config must be a JSON object", "<root>");
  ExperimentConfig cfg;
  try {
    cfg.kind = require(doc, "kind", "").get<std::string>();
    if (std::find(kKinds.begin(), kKinds.end(), cfg.kind) == kKinds.end())
      throw ConfigError("unknown kind '" + cfg.kind + "'", "kind");
    cfg.ensemble = Ensemble{parse_model(require(doc, "model", "")), parse_topology(require(doc, "topology", "")),
                            parse_disorder(require(doc, "disorder", ""))};
    if (doc.contains("estimator")) cfg.estimator = doc.at("estimator");
    cfg.master_seed = integer_field(doc, "master_seed", "", 0);
    cfg.samples = integer_field(doc, "samples", "", 1000);
    cfg.workers = integer_field(doc, "workers", "", 1);
    if (doc.contains("output")) cfg.output = doc.at("output").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(e.what(), "<root>");
  }
  cfg.document = std::move(doc);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(e.what(), "<root>");
  }
  return parse_config(std::move(doc));
}

// ---------------------------------------------------------------------------
// Canonical form and digest

/// Sorted keys, no whitespace; `workers` and `output` do not affect results
/// and are left out.
inline std::string canonical_dump(const json& doc) {
  json c = doc;
  c.erase("workers");
  c.erase("output");
  return c.dump();
}

inline std::string sha256_hex(const std::string& data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("SHA-256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 15]);
  }
  return out;
}

inline std::string config_digest(const ExperimentConfig& cfg) {
  return sha256_hex(canonical_dump(cfg.document));
}

}  // namespace fmloc::runner

#endif  // FMLOC_RUNNER_CONFIG_HPP
