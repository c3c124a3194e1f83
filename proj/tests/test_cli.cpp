/*
 * Copyright 2026 The brsvd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "brsvd/cli.hpp"
#include "brsvd/frames.hpp"
#include "brsvd/randomized_svd.hpp"
#include "brsvd/synthetic.hpp"
#include "test_util.hpp"

using namespace brsvd;
using brsvd::testing::TempDir;
using json = nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "brsvd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2 with usage text") {
    const auto r = run({"svd", "--input", "x.oocm", "--frobnicate"});
    CHECK(r.code == 2);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(run({}).code == 2);
    CHECK(run({"cost", "--m", "10"}).code == 2);
  }

  TEST_CASE("runtime failures exit 1") {
    TempDir dir;
    const auto r = run({"svd", "--input", (dir / "missing.oocm").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("missing.oocm") != std::string::npos);
  }

  TEST_CASE("help exits 0") { CHECK(run({"--help"}).code == 0); }

  TEST_CASE("gen then svd with an automatic plan") {
    TempDir dir;
    const auto store = (dir / "a.oocm").string();
    REQUIRE(run({"gen", "--output", store, "--m", "3000", "--n", "400", "--rank", "5", "--seed", "3"}).code == 0);
    const auto report = (dir / "r.json").string();
    const auto stats = (dir / "s.jsonl").string();
    const auto r = run({"svd", "--input", store, "--rank", "5", "--oversample", "5", "--power", "1", "--partitions",
                        "auto", "--memory-budget", "2MiB", "--report", report, "--stats-jsonl", stats,
                        "--output-prefix", (dir / "f").string()});
    REQUIRE(r.code == 0);
    const auto j = read_json(report);
    CHECK(j["full_passes"].get<double>() == 2.0);
    CHECK(j["full_passes_exact"] == "2/1");
    CHECK(j["s"].get<long long>() > 1);
    CHECK(j["relative_error"].get<double>() <= 1e-12);
    CHECK(j["sigma"].size() == 10);
    CHECK(j["stages"].size() == 4);
    std::ifstream lines(stats);
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
      CHECK(json::parse(line).contains("words_read"));
      ++count;
    }
    CHECK(count == 4);
    const auto u = MatrixStore::open(dir / "f.U.oocm");
    CHECK(u.rows() == 3000);
    CHECK(u.cols() == 10);
    CHECK(MatrixStore::open(dir / "f.Vt.oocm").cols() == 400);
  }

  TEST_CASE("svd-naive reports 2(q + 1) passes") {
    TempDir dir;
    const auto store = (dir / "a.oocm").string();
    REQUIRE(run({"gen", "-o", store, "--m", "500", "--n", "80", "--rank", "3"}).code == 0);
    for (const int q : {0, 2}) {
      const auto report = (dir / "r.json").string();
      REQUIRE(run({"svd-naive", "-i", store, "-k", "3", "-q", std::to_string(q), "-s", "4", "--report", report}).code ==
              0);
      CHECK(read_json(report)["full_passes"].get<double>() == 2.0 * (q + 1));
    }
  }

  TEST_CASE("input below the budget plans one block and matches the in-core path") {
    TempDir dir;
    const auto store = (dir / "a.oocm").string();
    REQUIRE(run({"gen", "-o", store, "--m", "400", "--n", "60", "--rank", "4", "--seed", "5"}).code == 0);
    const auto report = (dir / "r.json").string();
    REQUIRE(run({"svd", "-i", store, "-k", "4", "--memory-budget", "1GiB", "--seed", "8", "--report", report}).code ==
            0);
    const auto j = read_json(report);
    CHECK(j["s"] == 1);
    SketchConfig cfg;
    cfg.target_rank = 4;
    cfg.master_seed = 8;
    const auto f = rsvd_incore<double>(MatrixStore::open(store).read_all<double>(), cfg);
    for (Index i = 0; i < f.sigma.size(); ++i) CHECK(j["sigma"][static_cast<std::size_t>(i)].get<double>() == f.sigma(i));
  }

  TEST_CASE("memory budget from the environment") {
    TempDir dir;
    const auto store = (dir / "a.oocm").string();
    REQUIRE(run({"gen", "-o", store, "--m", "1000", "--n", "100", "--rank", "2"}).code == 0);
    const auto report = (dir / "r.json").string();
    ::setenv("BRSVD_MEMORY_BUDGET", "512KiB", 1);
    const int code = run({"svd", "-i", store, "-k", "2", "--report", report}).code;
    ::unsetenv("BRSVD_MEMORY_BUDGET");
    REQUIRE(code == 0);
    const auto j = read_json(report);
    CHECK(j["memory_budget"] == 512 * 1024);
    CHECK(j["s"].get<long long>() > 1);
  }

  TEST_CASE("single precision override") {
    TempDir dir;
    const auto store = (dir / "a.oocm").string();
    REQUIRE(run({"gen", "-o", store, "--m", "800", "--n", "90", "--rank", "4", "--precision", "f32"}).code == 0);
    const auto report = (dir / "r.json").string();
    REQUIRE(run({"svd", "-i", store, "-k", "4", "--report", report}).code == 0);
    const auto j = read_json(report);
    CHECK(j["precision"] == "f32");
    CHECK(j["relative_error"].get<double>() <= 1e-5);
  }

  TEST_CASE("ratio-based generation") {
    TempDir dir;
    const auto r = run({"gen", "-o", (dir / "a.oocm").string(), "--ratio", "1024:32:1", "--size", "4MiB"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["m"] == 4096);
    CHECK(j["n"] == 128);
    CHECK(j["rank"] == 4);
  }

  TEST_CASE("infeasible budget exits 1 with the minimum") {
    TempDir dir;
    const auto store = (dir / "a.oocm").string();
    REQUIRE(run({"gen", "-o", store, "--m", "1000", "--n", "100", "--rank", "2"}).code == 0);
    const auto r = run({"svd", "-i", store, "-k", "2", "--memory-budget", "4KiB"});
    CHECK(r.code == 1);
    CHECK(r.err.find("budget") != std::string::npos);
  }

  TEST_CASE("cost report") {
    const auto r = run({"cost", "--m", "8192", "--n", "8192", "--l", "20", "--q", "1", "--variant", "naive", "--json"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["matrix_words_value"].get<double>() == 4.0 * 8192 * 8192);
    CHECK(j["matrix_passes"].get<double>() == 4.0);
    CHECK(j["total_flops_leading"] == "mnlq + 2mnl");
    const auto p = run({"cost", "--m", "8192", "--n", "8192", "--l", "20", "--q", "1", "--json"});
    CHECK(json::parse(p.out)["total_words_leading"] == "2mn");
    CHECK(run({"cost", "--m", "8", "--n", "8", "--l", "2", "--variant", "fast"}).code == 1);
  }

  TEST_CASE("rpca over a frame directory") {
    TempDir dir;
    const auto truth = write_planted_video(dir / "in", 16, 12, 12, 4, 4);
    const auto trace = (dir / "trace.jsonl").string();
    const auto report = (dir / "rpca.json").string();
    const auto r = run({"rpca", "--frames", (dir / "in").string(), "--rank", "2", "--oversample", "4",
                        "--output-lowrank", (dir / "low").string(), "--output-sparse", (dir / "sparse").string(),
                        "--trace", trace, "--report", report});
    REQUIRE(r.code == 0);
    const auto j = read_json(report);
    CHECK(j["converged"] == true);
    std::ifstream lines(trace);
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
      const auto it = json::parse(line);
      for (const char* key : {"i", "mu", "residual", "svd_seconds", "iter_seconds"}) CHECK(it.contains(key));
      ++count;
    }
    CHECK(count == j["iterations"].get<int>());
    CHECK(std::filesystem::exists(dir / "low" / "frame_00000.pgm"));
    CHECK(std::filesystem::exists(dir / "sparse" / "frames.json"));
    CHECK(read_pgm(dir / "low" / "frame_00011.pgm").width == 16);
  }

  TEST_CASE("rpca over a store") {
    TempDir dir;
    const auto p = brsvd::testing::planted_rpca(60, 2, 0.05, 3);
    auto store = MatrixStore::create(dir / "m.oocm", 60, 60, ElementType::f64);
    store.write_block<double>({0, 60}, p.M);
    const auto r = run({"rpca", "-i", (dir / "m.oocm").string(), "-k", "5", "-p", "5", "--output-lowrank",
                        (dir / "l.oocm").string(), "--output-sparse", (dir / "s.oocm").string()});
    REQUIRE(r.code == 0);
    const Mat<double> low = MatrixStore::open(dir / "l.oocm").read_all<double>();
    CHECK((low - p.L0).norm() / p.L0.norm() <= 1e-4);
    CHECK(run({"rpca", "-k", "5"}).code == 1);
  }

  TEST_CASE("bench rows satisfy the pass-count law") {
    TempDir dir;
    const auto csv = (dir / "b.csv").string();
    const auto r = run({"bench", "--ratio", "1024:32:1", "--ratio", "256:256:1", "--sizes", "1MiB,2MiB",
                        "--memory-budget", "1MiB", "--power", "2", "--workdir", (dir / "w").string(), "--csv", csv});
    REQUIRE(r.code == 0);
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "size_bytes,ratio,variant,m,n,k,q,s,passes,seconds,error");
    int rows = 0;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
      REQUIRE(cells.size() == 11);
      const double passes = std::stod(cells[8]);
      CHECK(passes == (cells[2] == "proposed" ? 2.0 : 6.0));
      CHECK(std::stod(cells[10]) <= 1e-10);
      ++rows;
    }
    CHECK(rows == 8);
    CHECK(run({"bench", "--sizes", "16GiB"}).code == 1);
  }

  TEST_CASE("installed binary follows the same exit codes") {
    const char* bin = std::getenv("BRSVD_CLI");
    if (bin == nullptr) return;
    const std::string base = std::string("\"") + bin + "\"";
    CHECK(WEXITSTATUS(std::system((base + " cost --m 4 --n 4 --l 2 > /dev/null").c_str())) == 0);
    CHECK(WEXITSTATUS(std::system((base + " cost --bogus > /dev/null 2>&1").c_str())) == 2);
    CHECK(WEXITSTATUS(std::system((base + " svd -i /nonexistent/x.oocm > /dev/null 2>&1").c_str())) == 1);
  }
}
