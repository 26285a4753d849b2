// Copyright 2026 The UVR Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "uvr/cli.hpp"
#include "uvr/config.hpp"
#include "uvr/error.hpp"

namespace uvr {
namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) { setenv(name, value, 1); }
  ~ScopedEnv() { unsetenv(name_); }

 private:
  const char* name_;
};

TEST(Config, Defaults) {
  const Config c;
  EXPECT_EQ(c.w, 8u);
  EXPECT_EQ(c.m_tilt, 5u);
  EXPECT_EQ(c.m_cmrm, 8u);
  EXPECT_EQ(c.delta, 0.4);
  EXPECT_EQ(c.cmrm().default_threshold, 0.4);
}

TEST(Config, FileParsing) {
  testing::TempDir dir("cfg");
  write(dir / "a.cfg", "# comment\nw = 3\n\ndelta=0.25  # trailing\nnegatives = global\n");
  const Config c = Config::from_file(dir / "a.cfg");
  EXPECT_EQ(c.w, 3u);
  EXPECT_EQ(c.delta, 0.25);
  EXPECT_EQ(c.negatives, NegativeScope::kGlobal);
  write(dir / "b.cfg", "w = 3\nbogus = 1\n");
  try {
    Config::from_file(dir / "b.cfg");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
  write(dir / "c.cfg", "w = 0\n");
  EXPECT_THROW(Config::from_file(dir / "c.cfg"), ValidationError);
  write(dir / "d.cfg", "delta = 2\n");
  EXPECT_THROW(Config::from_file(dir / "d.cfg"), ValidationError);
  Config bad;
  bad.heads = 3;
  EXPECT_THROW(bad.fusion(), ValidationError);
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ASSERT_EQ(run({"make-synthetic", "--out", (dir / "data").string()}).code, 0);
    ASSERT_EQ(run({"build-table", "--corpus", data("corpus.jsonl"), "--stopwords",
                   data("stopwords.txt"), "--out", path("t.uvrt")})
                  .code,
              0);
  }
  std::string data(const std::string& f) const { return (dir / "data" / f).string(); }
  std::string path(const std::string& f) const { return (dir / f).string(); }
  testing::TempDir dir{"cli"};
};

TEST_F(CliTest, BuildTableIsByteStable) {
  const CliRun r = run({"build-table", "--corpus", data("corpus.jsonl"), "--stopwords",
                     data("stopwords.txt"), "--out", path("t2.uvrt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("t.uvrt")), slurp(path("t2.uvrt")));
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["documents"].get<int>(), 200);
}

TEST_F(CliTest, RetrieveSentinelAndHits) {
  CliRun r = run({"retrieve", "--table", path("t.uvrt"), "--text", "zebra quantum"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "{\"image_id\":0}\n");
  r = run({"retrieve", "--table", path("t.uvrt"), "--text", "a red dog", "-m", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_GE(j["image_id"].get<int>(), 1);
    EXPECT_TRUE(j.contains("count"));
    ++n;
  }
  EXPECT_GE(n, 1u);
  EXPECT_LE(n, 3u);
}

TEST_F(CliTest, SeedPrecedence) {
  write(path("seed.cfg"), "seed = 5\n");
  const std::vector<std::string> base = {"retrieve", "--table", path("t.uvrt"), "--text",
                                         "a red dog", "--ablate", "random_mapping"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args).out;
  };
  const std::string s5 = with({"--seed", "5"});
  const std::string s6 = with({"--seed", "6"});
  ASSERT_NE(s5, s6);
  {
    ScopedEnv env("UVR_SEED", "6");
    EXPECT_EQ(with({}), s6);
    auto args = base;
    args.insert(args.begin(), {"--config", path("seed.cfg")});
    EXPECT_EQ(run(args).out, s5);
    args.insert(args.end(), {"--seed", "6"});
    EXPECT_EQ(run(args).out, s6);
  }
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"retrieve", "--table", path("t.uvrt")}).code, kExitUsage);
  EXPECT_EQ(run({"retrieve", "--text", "dog"}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"retrieve", "--table", path("missing.uvrt"), "--text", "dog"}).code, kExitData);
  write(path("bad.jsonl"), "{\"id\": 1, \"text\": \"x\"}\n");
  EXPECT_EQ(run({"build-table", "--corpus", path("bad.jsonl"), "--stopwords", data("stopwords.txt"),
                 "--out", path("x.uvrt")})
                .code,
            kExitData);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  EXPECT_EQ(run({"gradcheck", "--fixtures", "3"}).code, kExitOk);
}

TEST_F(CliTest, FusePipeline) {
  CliRun r = run({"init-params", "--from", path("t.uvrt"), "--features", data("features.uvrf"),
               "--out", path("p.uvrp")});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"fuse", "--index-or-table", path("t.uvrt"), "--features", data("features.uvrf"),
           "--params", path("p.uvrp"), "--text", "a red dog", "--pair", "the blue cat", "--dump"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j["sides"].size(), 2u);
  EXPECT_EQ(j["h_hat_shape"][0].get<int>(), j["sides"][0]["h_shape"][0].get<int>() +
                                               j["sides"][1]["h_shape"][0].get<int>());
  const double g = j["mean_gate"].get<double>();
  EXPECT_GT(g, 0.0);
  EXPECT_LT(g, 1.0);
  r = run({"fuse", "--index-or-table", path("t.uvrt"), "--features", data("features.uvrf"),
           "--params", path("p.uvrp"), "--text", "a red dog", "--lambda", "0.25"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(r.out)["mean_gate"].get<double>(), 0.25);
  EXPECT_EQ(run({"fuse", "--index-or-table", path("t.uvrt"), "--features", data("features.uvrf"),
                 "--params", path("p.uvrp"), "--text", "a red dog", "--lambda", "2"})
                .code,
            kExitUsage);
}

}  // namespace
}  // namespace uvr
