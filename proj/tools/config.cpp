// Copyright 2026 The dgbs Authors
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

#include "config.hpp"

#include <charconv>
#include <fstream>
#include <optional>

namespace dgbs::cli {
namespace {

const Json& empty_object() {
  static const Json e = Json::object();
  return e;
}

std::string type_name(const Json& j) { return j.type_name(); }

}  // namespace

Section::Section(const Json& j, std::string pointer) : j_(&j), pointer_(std::move(pointer)) {
  if (!j.is_object()) throw SchemaError(pointer_.empty() ? "/" : pointer_, "expected an object, got " + type_name(j));
}

bool Section::has(const std::string& key) const { return j_->contains(key) && !(*j_)[key].is_null(); }

bool Section::present(const std::string& key) const { return j_->contains(key); }

const Json& Section::raw_or_null(const std::string& key) const {
  static const Json null_value;
  return j_->contains(key) ? (*j_)[key] : null_value;
}

void Section::allow(std::initializer_list<const char*> allowed) const {
  for (const auto& [key, value] : j_->items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw SchemaError(path(key), "unknown key");
  }
}

Section Section::child(const std::string& key) const {
  return has(key) ? Section((*j_)[key], path(key)) : Section(empty_object(), path(key));
}

const Json& Section::raw(const std::string& key) const {
  if (!has(key)) throw SchemaError(path(key), "required value is missing");
  return (*j_)[key];
}

double Section::number(const std::string& key) const {
  const Json& v = raw(key);
  if (!v.is_number()) throw SchemaError(path(key), "expected a number, got " + type_name(v));
  return v.get<double>();
}

double Section::number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

long long Section::integer(const std::string& key, long long fallback) const {
  if (!has(key)) return fallback;
  const Json& v = raw(key);
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == static_cast<double>(static_cast<long long>(d))) return static_cast<long long>(d);
  }
  throw SchemaError(path(key), "expected an integer, got " + type_name(v));
}

bool Section::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const Json& v = raw(key);
  if (!v.is_boolean()) throw SchemaError(path(key), "expected a boolean, got " + type_name(v));
  return v.get<bool>();
}

std::string Section::string(const std::string& key, const std::string& fallback) const {
  if (!has(key)) return fallback;
  const Json& v = raw(key);
  if (!v.is_string()) throw SchemaError(path(key), "expected a string, got " + type_name(v));
  return v.get<std::string>();
}

std::uint64_t RunConfig::seed() const {
  const long long s = root().integer("seed", 1);
  if (s < 0) throw SchemaError("/seed", "must be >= 0");
  return static_cast<std::uint64_t>(s);
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw SchemaError("/", "cannot open config file " + file.string());
  RunConfig cfg;
  try {
    cfg.doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError("/", std::string("invalid JSON: ") + e.what());
  }
  cfg.base_dir = file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");
  if (!cfg.doc.is_object()) throw SchemaError("/", "config must be a JSON object");
  const Section root = cfg.root();
  root.allow({"version", "seed", "output", "scenario", "models", "probs", "simulate", "reconstruct", "compare", "lock",
              "oracle"});
  if (!root.has("version")) throw SchemaError("/version", "required value is missing");
  if (root.integer("version", 0) != kConfigVersion)
    throw SchemaError("/version", "unsupported version (expected " + std::to_string(kConfigVersion) + ")");
  return cfg;
}

void finalize(RunConfig& cfg) {
  // nlohmann::json keeps object keys sorted, so dump() is canonical. The
  // output directory does not change results and stays out of the hash.
  Json effective = cfg.doc;
  effective.erase("output");
  const std::string text = effective.dump();
  cfg.hash = hex64(fnv1a(text.data(), text.size()));
}

ModelSpec parse_model(const std::string& text, const std::string& pointer) {
  try {
    return ModelSpec::parse(text);
  } catch (const Error& e) {
    throw SchemaError(pointer, e.what());
  }
}

Scenario scenario_from(const Section& s, const std::filesystem::path& base_dir) {
  s.allow({"modes", "eta", "n_pdc", "pdc_rate", "n_alpha", "phi", "squeezer_ports", "coherent_port", "circuit_seed",
           "transfer", "r", "alpha"});
  // An explicit null disables a port; absence keeps the default.
  const auto explicit_null = [&](const std::string& key) { return s.raw_or_null(key).is_null() && s.present(key); };
  const auto port_pair = [&](std::optional<std::array<Index, 2>> fallback) -> std::optional<std::array<Index, 2>> {
    if (explicit_null("squeezer_ports")) return std::nullopt;
    if (!s.has("squeezer_ports")) return fallback;
    const Json& v = s.raw("squeezer_ports");
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
      throw SchemaError(s.path("squeezer_ports"), "expected two integer ports or null");
    return std::array<Index, 2>{v[0].get<Index>(), v[1].get<Index>()};
  };
  const auto coherent = [&](std::optional<Index> fallback) -> std::optional<Index> {
    if (explicit_null("coherent_port")) return std::nullopt;
    if (!s.has("coherent_port")) return fallback;
    return static_cast<Index>(s.integer("coherent_port", 0));
  };

  if (s.has("transfer")) {
    for (const char* key : {"modes", "eta", "n_pdc", "pdc_rate", "n_alpha", "circuit_seed"})
      if (s.present(key)) throw SchemaError(s.path(key), "not allowed together with an explicit transfer");
    const Json& t = s.raw("transfer");
    MatrixXc m;
    if (t.is_string()) {
      std::filesystem::path file = t.get<std::string>();
      if (file.is_relative()) file = base_dir / file;
      std::ifstream in(file);
      if (!in) throw SchemaError(s.path("transfer"), "cannot open " + file.string());
      Json doc;
      try {
        doc = Json::parse(in);
      } catch (const Json::parse_error& e) {
        throw SchemaError(s.path("transfer"), std::string("invalid JSON in ") + file.string() + ": " + e.what());
      }
      m = matrix_from_json(doc, s.path("transfer"));
    } else {
      m = matrix_from_json(t, s.path("transfer"));
    }
    std::optional<TransferMatrix> transfer;
    try {
      transfer.emplace(m);
    } catch (const Error& e) {
      throw SchemaError(s.path("transfer"), e.what());
    }
    Scenario sc{SourceConfig{}, *transfer};
    sc.source.r = s.number("r", 0.0);
    sc.source.alpha_mag = s.number("alpha", 0.0);
    sc.source.phi = s.number("phi", 0.0);
    sc.source.squeezer_ports = port_pair(std::array<Index, 2>{0, 1});
    sc.source.coherent_port = coherent(m.rows() > 2 ? std::optional<Index>{2} : std::nullopt);
    if (sc.source.r < 0.0) throw SchemaError(s.path("r"), "must be >= 0");
    if (sc.source.alpha_mag < 0.0) throw SchemaError(s.path("alpha"), "must be >= 0");
    try {
      sc.source.validate(m.rows());
    } catch (const ConfigError& e) {
      throw SchemaError(s.pointer(), e.what());
    }
    return sc;
  }

  for (const char* key : {"r", "alpha"})
    if (s.present(key)) throw SchemaError(s.path(key), "only allowed together with an explicit transfer");
  PaperScenarioParams p;
  p.modes = static_cast<Index>(s.integer("modes", p.modes));
  p.eta = s.number("eta", p.eta);
  p.n_pdc = s.number("n_pdc", p.n_pdc);
  const std::string rate = s.string("pdc_rate", "per_mode");
  if (rate == "per_mode") p.rate = PdcRate::kPerMode;
  else if (rate == "total") p.rate = PdcRate::kTotal;
  else throw SchemaError(s.path("pdc_rate"), "expected \"per_mode\" or \"total\"");
  p.n_alpha = s.number("n_alpha", p.n_alpha);
  p.phi = s.number("phi", p.phi);
  const long long circuit_seed = s.integer("circuit_seed", static_cast<long long>(p.seed));
  if (circuit_seed < 0) throw SchemaError(s.path("circuit_seed"), "must be >= 0");
  p.seed = static_cast<std::uint64_t>(circuit_seed);
  if (p.modes < 1) throw SchemaError(s.path("modes"), "must be >= 1");
  if (!(p.eta > 0.0 && p.eta <= 1.0)) throw SchemaError(s.path("eta"), "must lie in (0, 1]");
  if (p.n_pdc < 0.0) throw SchemaError(s.path("n_pdc"), "must be >= 0");
  if (p.n_alpha < 0.0) throw SchemaError(s.path("n_alpha"), "must be >= 0");
  const auto sq = port_pair(p.squeezer_ports);
  const auto co = coherent(p.coherent_port);
  if (sq) p.squeezer_ports = *sq;
  if (co) p.coherent_port = *co;
  try {
    Scenario sc = paper_scenario(p);
    sc.source.squeezer_ports = sq;
    sc.source.coherent_port = co;
    if (!sq) sc.source.r = 0.0;
    sc.source.validate(p.modes);
    return sc;
  } catch (const ConfigError& e) {
    throw SchemaError(s.pointer(), e.what());
  }
}

Json matrix_to_json(const MatrixXc& m) {
  Json data = Json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back({m(i, j).real(), m(i, j).imag()});
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

MatrixXc matrix_from_json(const Json& j, const std::string& pointer) {
  if (!j.is_object()) throw SchemaError(pointer, "expected a matrix object {rows, cols, data}");
  const Section s(j, pointer);
  s.allow({"rows", "cols", "data"});
  const long long rows = s.integer("rows", -1), cols = s.integer("cols", -1);
  if (rows <= 0 || cols <= 0) throw SchemaError(s.path("rows"), "rows and cols must be positive");
  const Json& data = s.raw("data");
  if (!data.is_array() || data.size() != static_cast<std::size_t>(rows * cols))
    throw SchemaError(s.path("data"), "expected rows * cols entries");
  MatrixXc m(rows, cols);
  for (std::size_t k = 0; k < data.size(); ++k) {
    const Json& e = data[k];
    const std::string p = s.path("data") + "/" + std::to_string(k);
    if (e.is_number()) {
      m(static_cast<Index>(k) / cols, static_cast<Index>(k) % cols) = e.get<double>();
    } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
      m(static_cast<Index>(k) / cols, static_cast<Index>(k) % cols) = Complex(e[0].get<double>(), e[1].get<double>());
    } else {
      throw SchemaError(p, "expected [re, im] or a number");
    }
  }
  return m;
}

Json real_matrix_to_json(const MatrixXd& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

Json int_matrix_to_json(const Eigen::MatrixXi& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace dgbs::cli
