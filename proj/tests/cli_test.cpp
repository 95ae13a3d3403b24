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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "config.hpp"

namespace dgbs::cli {
namespace {

namespace fs = std::filesystem;

class CliRun : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::absolute("cli_runs") / ::testing::UnitTest::GetInstance()->current_test_info()->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  /// Exit status of `dgbs <args>` with output under dir_/out.
  int run(const std::string& args) const {
    const std::string cmd =
        std::string(DGBS_CLI) + " " + args + " --out " + (dir_ / "out").string() + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  Json json(const std::string& name) const {
    std::ifstream in(dir_ / "out" / name);
    return Json::parse(in);
  }

  std::vector<std::string> lines(const std::string& name) const {
    std::ifstream in(dir_ / "out" / name);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
  }

  fs::path dir_;
};

TEST(Config, SchemaErrorsCarryPointers) {
  const Json doc = Json::parse(R"({"a": {"b": "x", "c": 1.5}})");
  const Section s(doc, "");
  try {
    s.child("a").number("b");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.pointer(), "/a/b");
  }
  EXPECT_THROW(s.child("a").integer("c", 0), SchemaError);
  EXPECT_THROW(s.child("a").allow({"b"}), SchemaError);
  EXPECT_EQ(s.child("missing").number("x", 2.0), 2.0);
}

TEST(Config, MatrixJsonRoundTrip) {
  MatrixXc m(2, 3);
  m << Complex(1, 2), 3, Complex(0, -1), 0.1, Complex(1e-17, 5), -2;
  const Json j = matrix_to_json(m);
  EXPECT_EQ(j["rows"], 2);
  EXPECT_EQ(j["cols"], 3);
  EXPECT_EQ(matrix_from_json(Json::parse(j.dump()), "/m"), m);
  EXPECT_THROW(matrix_from_json(Json::parse(R"({"rows": 2, "cols": 2, "data": [1, 2, 3]})"), "/m"), SchemaError);
}

TEST(Config, FormatRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0})
    EXPECT_EQ(std::stod(format_double(x)), x) << format_double(x);
}

TEST(Config, HashIgnoresOutputDirectory) {
  RunConfig a, b;
  a.doc = Json::parse(R"({"version": 1, "seed": 2, "output": "x"})");
  b.doc = Json::parse(R"({"version": 1, "seed": 2, "output": "y"})");
  finalize(a);
  finalize(b);
  EXPECT_EQ(a.hash, b.hash);
  b.doc["seed"] = 3;
  finalize(b);
  EXPECT_NE(a.hash, b.hash);
}

TEST(Config, ExplicitTransferScenario) {
  const Json doc = Json::parse(R"({"transfer": {"rows": 2, "cols": 3, "data": [0.5, 0, 0.1, 0, 0.5, 0.2]},
                                   "r": 0.3, "alpha": 0.5, "coherent_port": null})");
  const Scenario sc = scenario_from(Section(doc, "/scenario"), ".");
  EXPECT_EQ(sc.modes(), 3);
  EXPECT_FALSE(sc.source.coherent_port.has_value());
  EXPECT_DOUBLE_EQ(sc.source.r, 0.3);
  const Json mixed = Json::parse(R"({"transfer": {"rows": 1, "cols": 1, "data": [1]}, "modes": 3})");
  EXPECT_THROW(scenario_from(Section(mixed, "/scenario"), "."), SchemaError);
  const Json wide = Json::parse(R"({"transfer": {"rows": 2, "cols": 1, "data": [1, 0]}})");
  EXPECT_THROW(scenario_from(Section(wide, "/scenario"), "."), SchemaError);
}

TEST_F(CliRun, ProbsCountsFourfoldPatterns) {
  const auto cfg = write("c.json", R"({"version": 1, "scenario": {"n_alpha": 0.0},
                                       "models": ["full", "full", "classical"], "probs": {"n_max": 4}})");
  ASSERT_EQ(run("probs --config " + cfg.string()), 0);
  EXPECT_EQ(lines("probs_full.csv").size(), 1365u + 2u);
  bool identical = false, classical = false;
  for (const auto& l : lines("tvd.csv")) {
    identical = identical || l == "full,full,4,0";
    if (l.rfind("full,classical,4,", 0) == 0) classical = std::stod(l.substr(17)) > 0.0;
  }
  EXPECT_TRUE(identical);
  EXPECT_TRUE(classical);
}

TEST_F(CliRun, SimulateThenReconstructRecoversTruth) {
  const std::string scenario = R"("scenario": {"modes": 6, "n_alpha": 0.7, "circuit_seed": 11})";
  const auto sim = write("sim.json", R"({"version": 1, )" + scenario +
                                         R"(, "simulate": {"noise": false, "windows": 2, "points_per_window": 12,
                                             "second_port": 3}})");
  ASSERT_EQ(run("simulate --config " + sim.string()), 0);
  const auto rec = write("rec.json", R"({"version": 1, )" + scenario + R"(, "reconstruct": {"records": ")" +
                                         (dir_ / "out" / "records.csv").string() + R"("}})");
  ASSERT_EQ(run("reconstruct --config " + rec.string()), 0);
  const Json r = json("reconstruction.json");
  EXPECT_TRUE(r["physical"].get<bool>());
  EXPECT_LT(r["truth"]["max_abs_error_b"].get<double>(), 1e-8);
  EXPECT_LT(r["truth"]["max_abs_error_c"].get<double>(), 1e-8);
  EXPECT_LT(r["truth"]["tvd_3fold"].get<double>(), 1e-8);
}

TEST_F(CliRun, CompareIdenticalModelsGivesOne) {
  const auto cfg = write("c.json", R"({"version": 1, "scenario": {"modes": 5},
                                       "compare": {"model_a": "full", "samples": 50, "n_min": 2, "n_max": 3}})");
  ASSERT_EQ(run("compare --config " + cfg.string()), 0);
  EXPECT_EQ(json("compare.json")["l"].get<double>(), 1.0);
  ASSERT_EQ(run("compare --config " + cfg.string() + " --k 0"), 0);
  EXPECT_LT(json("compare.json")["l"].get<double>(), 1.0);
  EXPECT_EQ(json("compare.json")["model_a"], "korder:0");
}

TEST_F(CliRun, LockWithoutDriftIsFlat) {
  const auto cfg = write("c.json", R"({"version": 1, "scenario": {"modes": 5},
                                       "lock": {"duration": 5, "tune": false,
                                                "drift": {"walk_sigma": 0, "amplitude": 0}}})");
  ASSERT_EQ(run("lock --config " + cfg.string()), 0);
  const Json j = json("lock.json");
  EXPECT_EQ(j["locked"]["residual_std"].get<double>(), 0.0);
  EXPECT_EQ(j["locked"]["range"].get<double>(), 0.0);
}

TEST_F(CliRun, OracleAgrees) {
  const auto cfg = write("c.json", R"({"version": 1, "scenario": {"modes": 3, "eta": 0.5, "n_alpha": 0.4}})");
  ASSERT_EQ(run("oracle --config " + cfg.string() + " --n-max 3"), 0);
  EXPECT_TRUE(json("oracle.json")["pass"].get<bool>());
}

TEST_F(CliRun, ExitCodes) {
  const auto ok = write("ok.json", R"({"version": 1, "scenario": {"modes": 4}, "probs": {"n_max": 2}})");
  EXPECT_EQ(run("probs --config " + ok.string()), 0);
  EXPECT_EQ(run("probs"), 2);
  EXPECT_EQ(run("probs --config " + ok.string() + " --unknown"), 2);
  EXPECT_EQ(run("frobnicate --config " + ok.string()), 2);
  EXPECT_EQ(run("probs --config " + write("v.json", R"({"version": 7})").string()), 2);
  EXPECT_EQ(run("probs --config " + write("k.json", R"({"version": 1, "scenario": {"mode": 4}})").string()), 2);
  EXPECT_EQ(run("probs --config " + write("j.json", "{not json").string()), 2);
  // The oracle cannot reach this tolerance: a domain failure.
  const auto tight = write("t.json", R"({"version": 1, "scenario": {"modes": 3, "n_alpha": 0.5},
                                         "oracle": {"max_photons": 2, "epsilon": 1e-3, "tolerance": 1e-300}})");
  EXPECT_EQ(run("oracle --config " + tight.string()), 1);
}

TEST_F(CliRun, OutputsCarryConfigHash) {
  const auto cfg = write("c.json", R"({"version": 1, "scenario": {"modes": 4}, "probs": {"n_max": 2}})");
  ASSERT_EQ(run("probs --config " + cfg.string()), 0);
  const std::string hash = json("probs.json")["config_hash"];
  EXPECT_EQ(hash.size(), 16u);
  EXPECT_EQ(lines("tvd.csv").front(), "# config_hash=" + hash);
  ASSERT_EQ(run("probs --config " + cfg.string() + " --seed 5"), 0);
  EXPECT_NE(json("probs.json")["config_hash"], hash);
}

}  // namespace
}  // namespace dgbs::cli
