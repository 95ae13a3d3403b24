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

#include "dgbs/records.hpp"

#include <charconv>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace dgbs {

std::string to_string(Setting s) {
  switch (s) {
    case Setting::kBlocked:
      return "blocked";
    case Setting::kInput1:
      return "input1";
    case Setting::kInput2:
      return "input2";
  }
  return "?";
}

Setting parse_setting(const std::string& text) {
  if (text == "blocked") return Setting::kBlocked;
  if (text == "input1") return Setting::kInput1;
  if (text == "input2") return Setting::kInput2;
  throw ConfigError("unknown measurement setting '" + text + "'");
}

double RecordPoint::count(const DetectionPattern& n) const {
  const auto it = counts.find(n);
  return it == counts.end() ? 0.0 : it->second;
}

double RecordPoint::vacuum() const {
  for (const auto& [n, c] : counts)
    if (n.total() == 0) return c;
  return 0.0;
}

double RecordPoint::rate(const DetectionPattern& n) const {
  const double v = vacuum();
  if (!(v > 0.0)) throw ConfigError("record point has no vacuum counts");
  return count(n) / v;
}

bool MeasurementRecord::has_collisions() const {
  for (const auto& p : points)
    for (const auto& [n, c] : p.counts)
      if (!n.collision_free()) return true;
  return false;
}

double MeasurementRecord::total_pulses() const {
  double s = 0.0;
  for (const auto& p : points) s += p.pulses;
  return s;
}

double MeasurementRecord::pooled_count(const DetectionPattern& n) const {
  double s = 0.0;
  for (const auto& p : points) s += p.count(n);
  return s;
}

double MeasurementRecord::pooled_vacuum() const {
  double s = 0.0;
  for (const auto& p : points) s += p.vacuum();
  return s;
}

void MeasurementRecord::validate() const {
  if (points.empty()) throw ConfigError(to_string(setting) + " record has no points");
  for (const auto& p : points) {
    if (!(p.vacuum() > 0.0)) throw ConfigError(to_string(setting) + " record point without vacuum counts");
    for (const auto& [n, c] : p.counts) {
      if (n.modes() != modes) throw ConfigError("record pattern width does not match the mode count");
      if (!(c >= 0.0)) throw ConfigError("negative counts in " + to_string(setting) + " record");
    }
  }
}

std::string outcome_label(const DetectionPattern& n) {
  if (n.total() == 0) return "vac";
  std::string out;
  for (Index j = 0; j < n.modes(); ++j)
    for (int c = 0; c < n[j]; ++c) {
      if (!out.empty()) out += '-';
      out += std::to_string(j);
    }
  return out;
}

DetectionPattern parse_outcome(const std::string& label, Index modes) {
  std::vector<int> counts(static_cast<std::size_t>(modes), 0);
  if (label == "vac") return DetectionPattern(counts);
  std::stringstream ss(label);
  std::string item;
  while (std::getline(ss, item, '-')) {
    Index j = -1;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), j);
    if (ec != std::errc() || ptr != item.data() + item.size() || j < 0 || j >= modes)
      throw ConfigError("bad outcome label '" + label + "'");
    ++counts[j];
  }
  return DetectionPattern(counts);
}

void write_records_csv(std::ostream& out, const std::vector<MeasurementRecord>& records) {
  out << "setting,phi,modes,counts,pulses\n";
  out << std::setprecision(17);
  for (const auto& rec : records)
    for (const auto& p : rec.points)
      for (const auto& [n, c] : p.counts)
        out << to_string(rec.setting) << ',' << p.phi << ',' << outcome_label(n) << ',' << c << ',' << p.pulses << '\n';
}

std::vector<MeasurementRecord> read_records_csv(std::istream& in, Index modes) {
  std::string line;
  // Leading '#' lines carry provenance and are skipped.
  do {
    if (!std::getline(in, line)) throw ConfigError("empty records file");
  } while (line.rfind('#', 0) == 0);
  if (line.rfind("setting,phi,modes,counts,pulses", 0) != 0) throw ConfigError("records file has an unexpected header");
  std::vector<MeasurementRecord> records;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string setting, phi, label, counts, pulses;
    if (!std::getline(ss, setting, ',') || !std::getline(ss, phi, ',') || !std::getline(ss, label, ',') ||
        !std::getline(ss, counts, ',') || !std::getline(ss, pulses))
      throw ConfigError("records row " + std::to_string(row) + " does not have five columns");
    const Setting s = parse_setting(setting);
    MeasurementRecord* rec = nullptr;
    for (auto& r : records)
      if (r.setting == s) rec = &r;
    if (!rec) {
      records.push_back({s, modes, {}});
      rec = &records.back();
    }
    double phi_v, counts_v, pulses_v;
    try {
      phi_v = std::stod(phi);
      counts_v = std::stod(counts);
      pulses_v = std::stod(pulses);
    } catch (const std::exception&) {
      throw ConfigError("records row " + std::to_string(row) + " has a non-numeric field");
    }
    if (rec->points.empty() || rec->points.back().phi != phi_v) rec->points.push_back({phi_v, pulses_v, {}});
    rec->points.back().counts[parse_outcome(label, modes)] += counts_v;
  }
  for (const auto& r : records) r.validate();
  return records;
}

}  // namespace dgbs
