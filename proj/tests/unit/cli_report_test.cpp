#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "qpass/errors.hpp"
#include "qpass/report.hpp"
#include "qpass/run_config.hpp"
#include "qpass/run_log.hpp"
#include "test_util.hpp"

using namespace qpass;

namespace {

void add_eval(std::vector<LogRecord>& log, std::int64_t step, const std::string& set, const std::string& id,
              double agent, double o3, double best, const std::string& seq = "") {
  const std::string phase = "eval:" + set;
  log.push_back({step, phase, id, "agent_speedup", agent});
  log.push_back({step, phase, id, "o3_speedup", o3});
  log.push_back({step, phase, id, "best_speedup", best});
  log.push_back({step, phase, id, "sequence", seq});
}

}  // namespace

TEST(GeometricMean, Examples) {
  EXPECT_NEAR(*geometric_mean(std::vector<double>{2.0, 0.5}), 1.0, 1e-12);
  EXPECT_NEAR(*geometric_mean(std::vector<double>{1.0, 1.0, 8.0}), 2.0, 1e-12);
  EXPECT_NEAR(*geometric_mean(std::vector<double>{4.0, 0.0, -1.0}), 4.0, 1e-12);
  EXPECT_FALSE(geometric_mean(std::vector<double>{0.0}));
}

TEST(Ratio, Formatting) {
  EXPECT_EQ(format_ratio(1.0), "1.00x");
  EXPECT_EQ(format_ratio(3.85 / 2.91), "1.32x");
  EXPECT_EQ(format_ratio(3.19 / 4.55), "0.70x");
}

TEST(RunLog, RoundTrip) {
  TempDir dir;
  {
    RunLog log(dir.path() / "sub" / "log.jsonl");
    log.write({5, "eval:train", "a.c", "agent_speedup", 1.5});
    log.write({5, "eval:train", "a.c", "sequence", std::string("1→2")});
  }
  const auto back = read_run_log(dir.path() / "sub" / "log.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_DOUBLE_EQ(back[0].number(), 1.5);
  EXPECT_EQ(back[1].text(), "1→2");
  EXPECT_THROW(back[1].number(), Error);
}

TEST(RunLog, MalformedLineNamesLine) {
  TempDir dir;
  std::ofstream(dir.path() / "bad.jsonl") << "{\"step\":1,\"phase\":\"x\",\"metric\":\"m\",\"value\":1}\n{oops\n";
  try {
    read_run_log(dir.path() / "bad.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Report, RowsSortedAndRatiosConsistent) {
  std::vector<LogRecord> log;
  add_eval(log, 100, "train", "a", 1.0, 2.0, 1.0);
  add_eval(log, 200, "train", "a", 3.0, 2.0, 3.0);
  add_eval(log, 200, "train", "b", 1.5, 1.5, 1.5);
  add_eval(log, 200, "valid", "c", 0.9, 1.0, 1.2);
  const auto r = build_report(log);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[0].program_id, "a");
  EXPECT_EQ(format_ratio(r.rows[0].ratio()), "1.50x");
  EXPECT_EQ(format_ratio(r.rows[1].ratio()), "1.00x");
  EXPECT_EQ(r.rows[2].set, "valid");
  for (const auto& row : r.rows) EXPECT_EQ(format_ratio(row.ratio()), format_ratio(row.agent_speedup / row.o3_speedup));
}

TEST(Report, BestCurveNeverDecreases) {
  std::vector<LogRecord> log;
  add_eval(log, 1, "train", "a", 2.0, 1.0, 2.0);
  add_eval(log, 1, "train", "b", 1.0, 1.0, 1.0);
  add_eval(log, 2, "train", "a", 1.0, 1.0, 1.5);  // a lower value reported later
  add_eval(log, 2, "train", "b", 1.2, 1.0, 1.2);
  add_eval(log, 3, "train", "a", 0.5, 1.0, 0.5);
  add_eval(log, 3, "train", "b", 0.5, 1.0, 0.5);
  const auto r = build_report(log);
  ASSERT_EQ(r.series.size(), 3u);
  for (std::size_t i = 1; i < r.series.size(); ++i)
    EXPECT_GE(*r.series[i].best_geomean, *r.series[i - 1].best_geomean);
  EXPECT_NEAR(*r.series[0].agent_geomean, std::sqrt(2.0), 1e-12);
}

TEST(Report, EmptyLogIsAConfigError) {
  EXPECT_THROW(build_report({}), ConfigError);
  std::vector<LogRecord> only_train{{1, "train", "", "loss", 0.5}};
  EXPECT_THROW(build_report(only_train), ConfigError);
}

TEST(Report, PrintsTopAndBottomFive) {
  std::vector<LogRecord> log;
  for (int i = 0; i < 12; ++i) add_eval(log, 1, "train", "p" + std::to_string(i), 1.0 + i, 1.0, 1.0 + i);
  std::ostringstream out;
  print_report(build_report(log), out);
  const auto text = out.str();
  EXPECT_NE(text.find("best 5"), std::string::npos);
  EXPECT_NE(text.find("worst 5"), std::string::npos);
  EXPECT_NE(text.find("p11"), std::string::npos);
  EXPECT_EQ(text.find("p6\t"), std::string::npos);
}

TEST(Report, WritesFiles) {
  TempDir dir;
  std::vector<LogRecord> log;
  add_eval(log, 1, "train", "a", 2.0, 1.0, 2.0, "1→2");
  write_report_files(build_report(log), dir.path());
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "programs.tsv"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "series.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "curves.svg"));
}

TEST(RunConfig, DefaultsAndOverrides) {
  const auto c = parse_run_config(R"({"synthetic_programs": 3, "level": "L", "train": {"tau": 10, "delta": 20}})");
  EXPECT_EQ(c.level, Level::L);
  EXPECT_EQ(c.train.tau, 10);
  EXPECT_EQ(c.split_train, 4);
  EXPECT_EQ(c.split_valid, 1);
  const auto again = parse_run_config(to_json(c));
  EXPECT_EQ(to_json(again), to_json(c));
}

TEST(RunConfig, Rejections) {
  EXPECT_THROW(parse_run_config(R"({"synthetic_programs": 3, "train": {"tau": 100, "delta": 150}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"synthetic_programs": 3, "typo": 1})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({})"), ConfigError);
  EXPECT_THROW(parse_run_config("{not json"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"synthetic_programs": 3, "level": "X"})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"synthetic_programs": 3, "policy": {"tiers": [{"below_seconds": 1, "repetitions": 5}]}})"),
               ConfigError);
}
