#include "mnl/config.hpp"
#include "mnl/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

using namespace mnl;

namespace {

RunConfig small_config() {
    RunConfig c;
    c.algos = {Algo::livarot};
    c.horizons = {4};
    c.T = 40;
    c.livarot.tau = 10;
    c.seeds = {0, 1};
    c.record_timing = false;
    c.threads = 1;
    return c;
}

std::string csv_of(const std::vector<RegretRecord>& rs) {
    std::ostringstream os;
    write_csv(os, rs);
    return os.str();
}

} // namespace

TEST(Config, ValidationNamesTheProblem) {
    auto c = small_config();
    EXPECT_NO_THROW(validate(c));
    c.seeds.clear();
    EXPECT_THROW(validate(c), InvalidInput);
    c = small_config();
    c.livarot.tau = 40;
    try {
        validate(c);
        FAIL();
    } catch (const InvalidInput& e) {
        EXPECT_NE(std::string(e.what()).find("T > tau"), std::string::npos);
    }
    c = small_config();
    c.delta = 0.0;
    EXPECT_THROW(validate(c), InvalidInput);
    c = small_config();
    c.horizons = {2};
    EXPECT_THROW(validate(c), InvalidInput);
    EXPECT_THROW(parse_algo("ucrl"), InvalidInput);
}

TEST(Config, JsonOverridesAndPerAlgorithmBlocks) {
    RunConfig c;
    apply_json(c, nlohmann::json::parse(R"({"algo": ["livarot", "ucrl-mnl-ol"], "H": [5, 10], "T": 300, "seeds": 3,
                                  "beta-scale": 0.5, "ucrl-mnl-ol": {"eta-omd": 7}, "kappa": "estimate",
                                  "fw-step": "line-search", "deterministic": true})"));
    EXPECT_EQ(c.algos.size(), 2u);
    EXPECT_EQ(c.horizons, (std::vector<int>{5, 10}));
    EXPECT_EQ(c.T, 300);
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
    EXPECT_EQ(c.livarot.beta_scale, 0.5);
    EXPECT_EQ(c.baseline.beta_scale, 0.5);
    EXPECT_EQ(c.baseline.eta_omd, 7.0);
    EXPECT_EQ(c.livarot.eta_omd, 20.0);
    EXPECT_EQ(c.kappa_mode, KappaMode::estimate);
    EXPECT_EQ(c.fw.step_rule, StepRule::line_search);
    EXPECT_FALSE(c.record_timing);
    EXPECT_THROW(apply_json(c, nlohmann::json::parse(R"({"T": "many"})")), InvalidInput);
    EXPECT_THROW(apply_json(c, nlohmann::json::parse(R"({"kappa": "guess"})")), InvalidInput);
}

TEST(Config, ExperimentDefaults) {
    const RunConfig c;
    EXPECT_EQ(c.livarot.tau, 80);
    EXPECT_EQ(c.livarot.lambda0, 1.0);
    EXPECT_EQ(c.livarot.lambda, 10.0);
    EXPECT_EQ(c.livarot.eta_omd, 20.0);
    EXPECT_EQ(c.livarot.beta_scale, 0.01);
    EXPECT_EQ(c.baseline.lambda, 10.0);
    EXPECT_EQ(c.baseline.eta_omd, 10.0);
    EXPECT_EQ(c.baseline.beta_scale, 0.02);
    EXPECT_EQ(c.delta, 0.1);
}

TEST(RunOne, AccountingAndSchemaFields) {
    const auto c = small_config();
    for (Algo a : {Algo::livarot, Algo::ucrl_mnl_ol, Algo::oracle}) {
        const auto r = run_one(c, a, 4, 3);
        ASSERT_FALSE(r.error);
        ASSERT_EQ(r.records.size(), 40u);
        double cum = 0.0;
        for (std::size_t i = 0; i < r.records.size(); ++i) {
            const auto& rec = r.records[i];
            EXPECT_EQ(rec.episode, static_cast<long long>(i + 1));
            EXPECT_EQ(rec.algo, to_string(a));
            EXPECT_EQ(rec.H, 4);
            EXPECT_EQ(rec.d, 2);
            EXPECT_EQ(rec.T, 40);
            EXPECT_EQ(rec.wall_ms, 0.0);
            cum += rec.instant_regret;
            EXPECT_EQ(rec.cum_regret, cum);
        }
    }
}

TEST(RunOne, DeterministicForFixedSeed) {
    const auto c = small_config();
    EXPECT_EQ(csv_of(run_one(c, Algo::livarot, 4, 7).records), csv_of(run_one(c, Algo::livarot, 4, 7).records));
    EXPECT_NE(csv_of(run_one(c, Algo::livarot, 4, 7).records), csv_of(run_one(c, Algo::livarot, 4, 8).records));
}

TEST(RunOne, RegretRowsCanBeNegative) {
    auto c = small_config();
    const auto r = run_one(c, Algo::oracle, 4, 0);
    bool negative = false;
    for (const auto& rec : r.records) negative = negative || rec.instant_regret < 0.0;
    EXPECT_TRUE(negative);
}

TEST(RunOne, OracleRegretIsZeroOnAverage) {
    auto c = small_config();
    c.T = 200;
    std::vector<double> finals;
    for (std::uint64_t seed = 0; seed < 40; ++seed) finals.push_back(run_one(c, Algo::oracle, 4, seed).records.back().cum_regret);
    const auto s = summarize(finals);
    EXPECT_LE(std::abs(s.mean), 3.0 * s.std / std::sqrt(40.0));
}

TEST(RunOne, ObserverSeesEveryLearningEpisode) {
    const auto c = small_config();
    std::vector<long long> seen;
    run_one(c, Algo::livarot, 4, 0, [&](const EpisodeView& v) {
        ASSERT_NE(v.estimator, nullptr);
        ASSERT_NE(v.tables, nullptr);
        seen.push_back(v.episode);
    });
    ASSERT_EQ(seen.size(), 30u);
    EXPECT_EQ(seen.front(), 11);
    EXPECT_EQ(seen.back(), 40);
}

TEST(Csv, RoundTripAndHeader) {
    const auto c = small_config();
    const auto recs = run_one(c, Algo::ucrl_mnl_ol, 4, 1).records;
    const auto text = csv_of(recs);
    EXPECT_EQ(text.substr(0, text.find('\n')), kCsvHeader);
    EXPECT_EQ(text.back(), '\n');
    std::istringstream in(text);
    const auto back = read_csv(in);
    ASSERT_EQ(back.size(), recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(back[i].instant_regret, recs[i].instant_regret);
        EXPECT_EQ(back[i].cum_regret, recs[i].cum_regret);
    }
    EXPECT_EQ(csv_of(back), text);
}

TEST(Csv, NumbersUseDotAndShortestForm) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(-2.5), "-2.5");
    EXPECT_EQ(format_double(0.0), "0");
}

TEST(Csv, MalformedRowsNameTheLine) {
    std::istringstream in(std::string(kCsvHeader) + "\n0,livarot,2,5,10,1,0.5,0.5,0\n0,livarot,2,5,10,2,oops,1,0\n");
    try {
        read_csv(in);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
    std::istringstream short_row(std::string(kCsvHeader) + "\n1,2,3\n");
    EXPECT_THROW(read_csv(short_row), ParseError);
    std::istringstream bad_header("seed,algo\n");
    EXPECT_THROW(read_csv(bad_header), ParseError);
}

TEST(Aggregate, HandValues) {
    std::vector<RegretRecord> rs{{0, "livarot", 2, 5, 2, 1, 1, 1, 0}, {1, "livarot", 2, 5, 2, 1, 3, 3, 0},
                                 {0, "livarot", 2, 5, 2, 2, 9, 10, 0}, {1, "livarot", 2, 5, 2, 2, 11, 14, 0},
                                 {0, "oracle", 2, 5, 2, 1, 0, 0, 0}};
    const auto rows = aggregate(rs);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].episode, 1);
    EXPECT_EQ(rows[1].episode, 2);
    EXPECT_DOUBLE_EQ(rows[1].cum_regret.mean, 12.0);
    EXPECT_NEAR(rows[1].cum_regret.std, 2.8284271247461903, 1e-12);
    EXPECT_EQ(rows[1].cum_regret.count, 2);
    EXPECT_EQ(rows[2].algo, "oracle");
    EXPECT_EQ(rows[2].cum_regret.std, 0.0);
    const auto scaling = scaling_summary(rs);
    ASSERT_EQ(scaling.size(), 2u);
    EXPECT_DOUBLE_EQ(scaling[0].normalized.mean, 12.0 / std::pow(5.0, 1.5));
}

TEST(Aggregate, FromFile) {
    const std::string path = ::testing::TempDir() + "agg.csv";
    {
        std::ofstream os(path);
        write_csv(os, {{0, "a", 2, 3, 1, 1, 1, 1, 0}, {1, "a", 2, 3, 1, 1, 2, 2, 0}});
    }
    const auto rows = aggregate(path);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_DOUBLE_EQ(rows[0].cum_regret.mean, 1.5);
    std::remove(path.c_str());
    EXPECT_THROW(aggregate(path), InvalidInput);
}

TEST(LogLogSlope, PowerLawRecoversExponent) {
    std::vector<long long> t;
    std::vector<double> v;
    for (long long k = 1; k <= 1000; ++k) {
        t.push_back(k);
        v.push_back(3.0 * std::pow(double(k), 0.5));
    }
    EXPECT_NEAR(loglog_slope(t, v, 500, 1000), 0.5, 1e-12);
    v[700] = -1.0;
    EXPECT_TRUE(std::isnan(loglog_slope(t, v, 500, 1000)));
}

TEST(Sweep, OrderAndByteStabilityAcrossThreadCounts) {
    auto c = small_config();
    c.algos = {Algo::livarot, Algo::ucrl_mnl_ol};
    c.horizons = {3, 4};
    c.seeds = {0, 1, 2};
    const auto one = run_sweep(c);
    c.threads = 4;
    const auto many = run_sweep(c);
    EXPECT_EQ(csv_of(one.records), csv_of(many.records));
    EXPECT_TRUE(one.failures.empty());
    ASSERT_EQ(one.records.size(), 2u * 2u * 3u * 40u);
    EXPECT_EQ(one.records.front().algo, "livarot");
    EXPECT_EQ(one.records.front().H, 3);
    EXPECT_EQ(one.records.back().algo, "ucrl-mnl-ol");
    EXPECT_EQ(one.records.back().seed, 2u);
}

TEST(Sweep, WritesCsvAndSummary) {
    auto c = small_config();
    c.out_path = ::testing::TempDir() + "sweep.csv";
    c.summary_path = ::testing::TempDir() + "summary.csv";
    run_sweep(c);
    std::ifstream in(c.out_path);
    EXPECT_EQ(read_csv(in).size(), 80u);
    std::ifstream s(c.summary_path);
    std::string header;
    std::getline(s, header);
    EXPECT_EQ(header.rfind("algo,H,T,seeds", 0), 0u);
}

TEST(Instances, BuildEachKind) {
    RunConfig c = small_config();
    c.instance = InstanceKind::kl_robust;
    c.num_states = 3;
    EXPECT_EQ(build_instance(c, 4, 0).dim(), 4);
    c.instance = InstanceKind::random;
    EXPECT_EQ(build_instance(c, 4, 0).num_states(), 3);
    c.instance = InstanceKind::hard;
    EXPECT_EQ(build_instance(c, 4, 0).num_states(), 6);
}
