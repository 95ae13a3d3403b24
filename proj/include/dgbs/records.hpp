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

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dgbs/hafnian.hpp"

namespace dgbs {

/// The three measurement configurations of the reconstruction protocol.
enum class Setting {
  kBlocked,  ///< coherent input blocked
  kInput1,   ///< coherent state in the first input, phase scanned
  kInput2,   ///< coherent state in a second input, phase scanned
};

std::string to_string(Setting s);
Setting parse_setting(const std::string& text);

/// Counts accumulated at one scan phase. Rates are ratios to the vacuum
/// count, i.e. estimates of pr(n) / p_vac. Counts are doubles so that
/// noiseless records can carry expected values.
struct RecordPoint {
  double phi = 0.0;
  double pulses = 0.0;
  std::map<DetectionPattern, double> counts;

  double count(const DetectionPattern& n) const;
  double vacuum() const;
  /// counts(n) / vacuum count.
  double rate(const DetectionPattern& n) const;
};

struct MeasurementRecord {
  Setting setting = Setting::kBlocked;
  Index modes = 0;
  std::vector<RecordPoint> points;

  /// True when two-photon collision outcomes (n_j = 2) were recorded.
  bool has_collisions() const;
  double total_pulses() const;
  /// Sum over points of count(n).
  double pooled_count(const DetectionPattern& n) const;
  double pooled_vacuum() const;

  /// Throws ConfigError when counts are negative, vacuum counts vanish or
  /// patterns have the wrong width.
  void validate() const;
};

/// Outcome labels: "vac", "3", "3-7", "3-3", "1-4-9" (0-based modes).
std::string outcome_label(const DetectionPattern& n);
DetectionPattern parse_outcome(const std::string& label, Index modes);

/// Rows: setting,phi,modes,counts,pulses. Points are keyed by (setting, phi)
/// in file order; lines starting with '#' are ignored on input.
void write_records_csv(std::ostream& out, const std::vector<MeasurementRecord>& records);
std::vector<MeasurementRecord> read_records_csv(std::istream& in, Index modes);

}  // namespace dgbs
