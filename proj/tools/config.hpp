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

#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "dgbs/experiment.hpp"
#include "dgbs/probability.hpp"

namespace dgbs::cli {

using Json = nlohmann::json;

inline constexpr int kConfigVersion = 1;

/// Malformed run configuration; `what()` starts with the JSON pointer of the
/// offending value.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& pointer, const std::string& message)
      : std::runtime_error(pointer + ": " + message), pointer_(pointer) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

/// Read-only view of one JSON object that knows its pointer path.
class Section {
 public:
  Section(const Json& j, std::string pointer);

  const std::string& pointer() const { return pointer_; }
  bool has(const std::string& key) const;  ///< present and not null
  bool present(const std::string& key) const;
  /// Throws SchemaError for any key outside `allowed`.
  void allow(std::initializer_list<const char*> allowed) const;
  Section child(const std::string& key) const;  ///< empty object when absent

  double number(const std::string& key, double fallback) const;
  double number(const std::string& key) const;
  long long integer(const std::string& key, long long fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  const Json& raw(const std::string& key) const;
  const Json& raw_or_null(const std::string& key) const;
  std::string path(const std::string& key) const { return pointer_ + "/" + key; }

 private:
  const Json* j_;
  std::string pointer_;
};

/// Parsed run configuration with command-line overrides applied.
struct RunConfig {
  Json doc;
  std::filesystem::path base_dir;  ///< relative file references resolve here
  std::string hash;                ///< FNV-1a of the effective document

  Section root() const { return Section(doc, ""); }
  std::uint64_t seed() const;
};

RunConfig load_config(const std::filesystem::path& file);
void finalize(RunConfig& cfg);

/// Either a Haar circuit from {modes, eta, n_pdc, n_alpha, ...} or an explicit
/// transfer matrix with r and alpha given directly.
Scenario scenario_from(const Section& s, const std::filesystem::path& base_dir);

ModelSpec parse_model(const std::string& text, const std::string& pointer);

Json matrix_to_json(const MatrixXc& m);
MatrixXc matrix_from_json(const Json& j, const std::string& pointer);
Json real_matrix_to_json(const MatrixXd& m);
Json int_matrix_to_json(const Eigen::MatrixXi& m);

/// Shortest decimal that round-trips the double.
std::string format_double(double x);

}  // namespace dgbs::cli
