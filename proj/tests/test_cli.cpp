// SPDX-License-Identifier: Apache-2.0
//
// cirad: compressive illumination radar simulation and sparse recovery
// Copyright (C) 2026 The cirad authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace
{

struct Run
{
    int code = -1;
    std::string out, err;
};

const fs::path& scratch()
{
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "cirad_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

Run run(const std::string& args)
{
    const fs::path o = scratch() / "stdout.txt", e = scratch() / "stderr.txt";
    const std::string cmd = std::string(CIRAD_CLI_PATH) + " " + args + " > " + o.string() + " 2> " + e.string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
}

std::string toy() { return std::string(CIRAD_SOURCE_DIR) + "/configs/toy.cfg"; }
std::string out(const std::string& name) { return (scratch() / name).string(); }

} // namespace

TEST_CASE("diagnose prints a report row", "[cli]")
{
    const auto r = run("diagnose --config " + toy() + " --seed 7 --out " + out("d"));
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("generator_tag,seed,N,M,N_c,N_T,N_R,mu,opnorm,min_colnorm2,max_colnorm2\n", 0) == 0);
    CHECK(r.out.find("multitone,7,64,21,5,1,1,") != std::string::npos);
    CHECK(fs::exists(out("d") + "/diagnose/manifest.json"));
    CHECK(fs::exists(out("d") + "/diagnose/report.csv"));
}

TEST_CASE("usage errors exit with 2", "[cli]")
{
    auto r = run("transmogrify");
    CHECK(r.code == 2);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(run("").code == 2);
    CHECK(run("diagnose --config /nonexistent/file.cfg").code == 2);
    CHECK(run("sweep --out " + out("u")).code == 2);
    CHECK(run("sweep --experiment mimo_roc --jobs 0").code == 2);
    CHECK(run("diagnose --config " + toy() + " --seed banana").code == 2);
    CHECK(run("diagnose --config " + toy() + " --override no_equals_sign --out " + out("u")).code == 2);
}

TEST_CASE("domain errors exit with 1 and name the error", "[cli]")
{
    auto r = run("diagnose --config " + toy() + " --override n_samples_M=100 --out " + out("e"));
    CHECK(r.code == 1);
    CHECK(r.err.find("ConsistencyError") != std::string::npos);
    r = run("diagnose --config " + toy() + " --override colour=red --out " + out("e"));
    CHECK(r.code == 1);
    CHECK(r.err.find("FormatError") != std::string::npos);
    r = run("sweep --experiment fourier --out " + out("e"));
    CHECK(r.code == 1);
    CHECK(r.err.find("SpecError") != std::string::npos);
    r = run("synth --config " + toy() + " --K 500 --out " + out("e"));
    CHECK(r.code == 1);
    CHECK(r.err.find("CardinalityError") != std::string::npos);
}

TEST_CASE("synth then solve", "[cli]")
{
    REQUIRE(run("synth --config " + toy() + " --seed 4 --K 3 --snr-db 30 --out " + out("s")).code == 0);
    const std::string meas = out("s") + "/synth/measurement.json";
    REQUIRE(fs::exists(meas));
    auto r = run("solve-grid --config " + toy() + " --input " + meas + " --out " + out("s"));
    REQUIRE(r.code == 0);
    const auto m = nlohmann::json::parse(r.out);
    CHECK(m.at("auc").get<double>() == 1.0);
    CHECK(m.at("rec_error").get<double>() < 0.2);
    CHECK(fs::exists(out("s") + "/solve-grid/trace.csv"));
    // the grid measurement cannot feed the continuum solver
    CHECK(run("solve-offgrid --config " + toy() + " --input " + meas + " --out " + out("s")).code == 1);

    r = run("solve-offgrid --config " + toy() + " --seed 4 --K 2 --noiseless --out " + out("s"));
    REQUIRE(r.code == 0);
    const auto g = nlohmann::json::parse(r.out);
    CHECK(g.at("all_found").get<bool>());
}

TEST_CASE("sweeps are byte-identical across runs and job counts", "[cli][property]")
{
    const std::string args = "sweep --experiment auc_vs_snr --override n_range_bins_N=64 "
                             "--override trials=3 --override sweep.m_ratio=0.3 --override sweep.snr_db=5,20 "
                             "--override sweep.k_ratio=0.1 --seed 9";
    REQUIRE(run(args + " --jobs 1 --out " + out("a")).code == 0);
    REQUIRE(run(args + " --jobs 1 --out " + out("b")).code == 0);
    REQUIRE(run(args + " --jobs 4 --out " + out("c")).code == 0);
    const std::string a = slurp(out("a") + "/auc_vs_snr/aggregate.csv");
    CHECK(!a.empty());
    CHECK(a == slurp(out("b") + "/auc_vs_snr/aggregate.csv"));
    CHECK(a == slurp(out("c") + "/auc_vs_snr/aggregate.csv"));
}

TEST_CASE("replay reproduces a record", "[cli][property]")
{
    REQUIRE(run("sweep --experiment phase_transition_noiseless --override n_range_bins_N=64 "
                "--override trials=2 --seed 3 --out " + out("r")).code == 0);
    const std::string rec = out("r") + "/phase_transition_noiseless/trials/trial_0003.json";
    REQUIRE(fs::exists(rec));
    auto r = run("replay --record " + rec);
    CHECK(r.code == 0);
    CHECK(r.out.find("replay identical") != std::string::npos);

    auto j = nlohmann::json::parse(slurp(rec));
    j["metrics"]["rec_error"] = 0.5;
    const std::string bad = out("r") + "/tampered.json";
    std::ofstream(bad) << j.dump();
    r = run("replay --record " + bad);
    CHECK(r.code == 1);
    CHECK(r.err.find("ReplayMismatchError") != std::string::npos);
    std::ofstream(out("r") + "/garbage.json") << "{not json";
    CHECK(run("replay --record " + out("r") + "/garbage.json").code == 1);
}
