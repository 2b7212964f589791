#include "hi/cli.hpp"
#include "hi/io.hpp"
#include "hi/witness.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace hi;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out, err;
    json doc() const { return json::parse(out); }
};

Result hi_run(const std::vector<std::string>& args) {
    std::ostringstream o, e;
    Result r;
    r.code = cli::run(args, o, e);
    r.out = o.str();
    r.err = e.str();
    return r;
}

const fs::path kFixtures = fs::path(HI_SOURCE_DIR) / "fixtures";

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        ::unsetenv(cli::kRegistryEnv);
        dir_ = fs::temp_directory_path() /
               ("hi_cli_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override {
        ::unsetenv(cli::kRegistryEnv);
        fs::remove_all(dir_);
    }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    std::string fixture(const std::string& name) const { return (kFixtures / name).string(); }
    std::string fresh_registry(const std::string& name) {
        EXPECT_EQ(hi_run({"registry", "init", path(name)}).code, 0);
        return path(name);
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, SchreierExamples) {
    auto r = hi_run({"schreier", "{1}", "0"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.doc().at("member"), true);
    EXPECT_EQ(r.doc().at("schema_version"), io::kSchemaVersion);
    EXPECT_EQ(hi_run({"schreier", "{}", "2"}).doc().at("member"), true);
    EXPECT_EQ(hi_run({"schreier", "{2,3,4}", "1"}).doc().at("member"), false);
    auto m = hi_run({"schreier", "{3,4,5}", "1", "--maximal"});
    EXPECT_EQ(m.doc().at("member"), true);
    EXPECT_EQ(m.doc().at("maximal"), true);
    auto a = hi_run({"schreier", "{2,3};{4,5}", "1", "--admissible"});
    EXPECT_EQ(a.doc().at("admissible"), true);
    EXPECT_EQ(hi_run({"schreier", "{1,2};{4,5}", "1", "--admissible"}).doc().at("admissible"), false);
}

TEST_F(Cli, SchreierAgreesWithPartitionOracle) {
    for (const auto& f : oracle::subsets_of_range(8, 4))
        for (int xi = 0; xi <= 2; ++xi) {
            std::string s = "{";
            for (std::size_t i = 0; i < f.size(); ++i) s += (i ? "," : "") + std::to_string(f[i]);
            s += "}";
            auto r = hi_run({"schreier", s, std::to_string(xi)});
            ASSERT_EQ(r.code, 0) << r.err;
            EXPECT_EQ(r.doc().at("member").get<bool>(), oracle::member(f, xi)) << s << " " << xi;
        }
}

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(hi_run({}).code, 2);
    EXPECT_EQ(hi_run({"bogus"}).code, 2);
    EXPECT_EQ(hi_run({"schreier", "{1,x}", "1"}).code, 2);
    EXPECT_EQ(hi_run({"schreier", "{0}", "1"}).code, 2);
    EXPECT_EQ(hi_run({"schreier", "{1}", "-1"}).code, 2);
    EXPECT_EQ(hi_run({"norm"}).code, 2);
    EXPECT_EQ(hi_run({"norm", path("none.json"), "--params", fixture("toy_params.json")}).code, 2);
    EXPECT_EQ(hi_run({"--manifest"}).code, 2);
    EXPECT_EQ(hi_run({"--help"}).code, 0);
}

TEST_F(Cli, ParamsGenerateAndValidate) {
    auto r = hi_run({"params", "generate", "--preset", "paper", "-o", path("p.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(io::read_text(path("p.json")), io::read_text(fixture("paper_params.json")));
    EXPECT_EQ(hi_run({"params", "validate", path("p.json")}).code, 0);
    // Toy parameters break the growth conditions by design; the report names them.
    auto t = hi_run({"params", "validate", fixture("toy_params.json")});
    EXPECT_EQ(t.code, 1);
    bool named = false;
    auto report = t.doc();
    for (const auto& c : report.at("checks"))
        if (c.at("name") == "m_1 > 246") named = !c.at("pass").get<bool>();
    EXPECT_TRUE(named);
    auto bad = json::parse(io::read_text(path("p.json")));
    bad["m"][1] = "1";
    io::write_text(path("bad.json"), bad.dump());
    EXPECT_EQ(hi_run({"params", "validate", path("bad.json")}).code, 2);
}

TEST_F(Cli, NormOfUnitVectorIsOneInEveryMode) {
    io::write_text(path("e.json"), io::dump(io::vector_to_json(SparseVector::unit(4))));
    auto all = hi_run({"norm", path("e.json"), "--params", fixture("toy_params.json")});
    ASSERT_EQ(all.code, 0) << all.err;
    EXPECT_EQ(all.doc().at("lower"), "1");
    EXPECT_EQ(all.doc().at("even_exact_sq"), "1");
    EXPECT_EQ(all.doc().at("upper_sq"), "1");
    EXPECT_EQ(all.doc().at("sandwich"), true);
    EXPECT_EQ(hi_run({"norm", path("e.json"), "--params", fixture("toy_params.json"), "--mode", "lower"}).doc().at("lower"),
              "1");
    auto ev = hi_run({"norm", path("e.json"), "--params", fixture("toy_params.json"), "--mode", "even-exact"}).doc();
    EXPECT_EQ(ev.at("even_exact_sq"), "1");
    EXPECT_FALSE(ev.contains("lower"));
    auto up = hi_run({"norm", path("e.json"), "--params", fixture("toy_params.json"), "--mode", "upper"}).doc();
    EXPECT_EQ(up.at("upper_sq"), "1");
    EXPECT_EQ(hi_run({"norm", path("e.json"), "--params", fixture("toy_params.json"), "--mode", "max"}).code, 2);
}

TEST_F(Cli, NormSandwichAndCertificateVerification) {
    auto r = hi_run({"norm", fixture("toy_vector.json"), "--params", fixture("toy_params.json"), "-o", path("c.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    auto d = r.doc();
    // Coordinates 1/2 and -2/3: the best even tree picks the larger coordinate, l2 is 25/36.
    EXPECT_EQ(d.at("lower"), "2/3");
    EXPECT_EQ(d.at("even_exact_sq"), "4/9");
    EXPECT_EQ(d.at("upper_sq"), "25/36");
    EXPECT_EQ(io::read_text(path("c.json")), r.out);
    EXPECT_EQ(hi_run({"verify", path("c.json"), "--params", fixture("toy_params.json")}).code, 0);

    auto tampered = d;
    tampered["even_exact_sq"] = "1/2";
    io::write_text(path("t1.json"), io::dump(tampered));
    EXPECT_EQ(hi_run({"verify", path("t1.json"), "--params", fixture("toy_params.json")}).code, 1);
    tampered = d;
    tampered["certificate"]["value"] = "3/4";
    io::write_text(path("t2.json"), io::dump(tampered));
    EXPECT_EQ(hi_run({"verify", path("t2.json"), "--params", fixture("toy_params.json")}).code, 1);
    tampered = d;
    tampered["vector"]["coords"]["3"] = "1/3";
    io::write_text(path("t3.json"), io::dump(tampered));
    EXPECT_EQ(hi_run({"verify", path("t3.json"), "--params", fixture("toy_params.json")}).code, 1);
}

TEST_F(Cli, MalformedJsonExitsTwoWithMessage) {
    io::write_text(path("bad.json"), "{ \"kind\": ");
    auto r = hi_run({"norm", path("bad.json"), "--params", fixture("toy_params.json")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("malformed JSON"), std::string::npos);
    EXPECT_TRUE(r.out.empty());
    io::write_text(path("zero.json"), R"({"kind":"vector","schema_version":1,"coords":{}})");
    EXPECT_EQ(hi_run({"norm", path("zero.json"), "--params", fixture("toy_params.json")}).code, 2);
    io::write_text(path("other.json"), R"({"kind":"blocks","schema_version":1,"blocks":[]})");
    EXPECT_EQ(hi_run({"verify", path("other.json"), "--params", fixture("toy_params.json")}).code, 2);
}

TEST_F(Cli, ToyFixtureMatchesFrozenRegression) {
    auto reg = fresh_registry("r.jsonl");
    auto r = hi_run({"witness", "build", "--params", fixture("toy_params.json"), "--registry", reg, "--fixture", "toy",
                     "-o", path("b.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.doc().at("all_pass"), true);
    EXPECT_EQ(io::read_text(path("b.json")), io::read_text(fixture("toy_bundle.json")));
    EXPECT_EQ(io::read_text(reg), io::read_text(fixture("toy_registry.jsonl")));
    EXPECT_EQ(hi_run({"witness", "verify", path("b.json"), "--params", fixture("toy_params.json")}).code, 0);
    EXPECT_EQ(hi_run({"verify", path("b.json"), "--params", fixture("toy_params.json"), "--registry", reg}).code, 0);
    // Rebuilding on the populated registry reuses the recorded weights.
    auto again = hi_run({"witness", "build", "--params", fixture("toy_params.json"), "--registry", reg, "--fixture",
                         "toy", "-o", path("b2.json")});
    EXPECT_EQ(again.code, 0);
    EXPECT_EQ(io::read_text(path("b2.json")), io::read_text(path("b.json")));
}

TEST_F(Cli, PaperFixtureMatchesFrozenRegression) {
    auto reg = fresh_registry("r.jsonl");
    auto r = hi_run({"witness", "build", "--params", fixture("paper_params.json"), "--registry", reg, "--fixture",
                     "paper", "-o", path("b.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(io::read_text(path("b.json")), io::read_text(fixture("paper_bundle.json")));
    EXPECT_EQ(hi_run({"verify", path("b.json"), "--params", fixture("paper_params.json")}).code, 0);
}

TEST_F(Cli, TamperedBundleFailsVerification) {
    auto doc = io::read_json(fixture("toy_bundle.json"));
    auto check = [&](const json& d) {
        io::write_text(path("t.json"), io::dump(d));
        return hi_run({"verify", path("t.json"), "--params", fixture("toy_params.json")}).code;
    };
    EXPECT_EQ(check(doc), 0);
    auto t = doc;
    t["plain"]["coords"]["4"] = "1";
    EXPECT_EQ(check(t), 1);
    t = doc;
    t["registry_hash"] = "0000000000000000";
    EXPECT_EQ(check(t), 1);
    t = doc;
    t["checks"][0]["pass"] = false;
    EXPECT_EQ(check(t), 1);
    t = doc;
    t["beta_sq"][0] = "1/2";
    EXPECT_EQ(check(t), 1);
}

TEST_F(Cli, MissingRegistryExitsTwo) {
    auto base = std::vector<std::string>{"witness", "build", "--params", fixture("toy_params.json"), "--fixture", "toy",
                                         "-o", path("b.json")};
    auto r = hi_run(base);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find(cli::kRegistryEnv), std::string::npos);
    auto with = base;
    with.insert(with.end(), {"--registry", path("absent.jsonl")});
    EXPECT_EQ(hi_run(with).code, 2);
    EXPECT_FALSE(fs::exists(path("b.json")));
    // The environment supplies the default path.
    auto reg = fresh_registry("env.jsonl");
    ::setenv(cli::kRegistryEnv, reg.c_str(), 1);
    EXPECT_EQ(hi_run(base).code, 0);
    EXPECT_FALSE(io::read_text(reg).empty());
    EXPECT_EQ(hi_run({"registry", "init", reg}).code, 2);
    EXPECT_EQ(hi_run({"registry", "init", reg, "--force"}).code, 0);
}

TEST_F(Cli, RegistryShowListsEntries) {
    auto r = hi_run({"registry", "show", fixture("toy_registry.jsonl"), "--params", fixture("toy_params.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.doc().at("entries"), 3);
    EXPECT_EQ(r.doc().at("cursor"), 10);
    EXPECT_EQ(r.doc().at("snapshot_hash"), io::read_json(fixture("toy_bundle.json")).at("registry_hash"));
    io::write_text(path("bad.jsonl"), "{\"seq\":\"x\",\"weight\":\"4\"}\n");
    EXPECT_EQ(hi_run({"registry", "show", path("bad.jsonl"), "--params", fixture("toy_params.json")}).code, 2);
    io::write_text(path("garbage.jsonl"), "not json\n");
    EXPECT_EQ(hi_run({"registry", "show", path("garbage.jsonl"), "--params", fixture("toy_params.json")}).code, 2);
}

TEST_F(Cli, WitnessFromBlocksNamesTheFailure) {
    std::vector<SqrtVector> u, v;
    for (std::int64_t k = 1; k <= 3; ++k) u.push_back(SqrtVector::from_rational(SparseVector::unit(k)));
    for (std::int64_t k = 4; k <= 6; ++k) v.push_back(SqrtVector::from_rational(SparseVector::unit(k)));
    io::write_text(path("u.json"), io::dump(io::blocks_to_json(u)));
    io::write_text(path("v.json"), io::dump(io::blocks_to_json(v)));
    auto reg = fresh_registry("r.jsonl");
    auto r = hi_run({"witness", "build", "--params", fixture("toy_params.json"), "--registry", reg, "--u", path("u.json"),
                     "--v", path("v.json"), "--j", "1", "--length", "2", "-o", path("b.json")});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.doc().at("built"), false);
    EXPECT_FALSE(r.doc().at("error").get<std::string>().empty());
    EXPECT_FALSE(fs::exists(path("b.json")));
    EXPECT_EQ(hi_run({"witness", "build", "--params", fixture("toy_params.json"), "--registry", reg, "--u",
                      path("u.json"), "-o", path("b.json")})
                  .code,
              2);
    io::write_text(path("v.json"), io::dump(io::blocks_to_json({v[1], v[0]})));
    EXPECT_EQ(hi_run({"witness", "build", "--params", fixture("toy_params.json"), "--registry", reg, "--u",
                      path("u.json"), "--v", path("v.json"), "-o", path("b.json")})
                  .code,
              2);
}

TEST_F(Cli, PairReportsIdentityAndSeparation) {
    auto r = hi_run({"pair", fixture("toy_bundle.json"), "--params", fixture("toy_params.json")});
    auto d = r.doc();
    EXPECT_EQ(d.at("pair").at("identity"), true);
    EXPECT_EQ(d.at("pair").at("identity_value"), "1/4");
    EXPECT_EQ(d.at("pair").at("exhaustive"), true);
    // The exhaustive toy closure does not separate the two vectors, so the gate fails.
    EXPECT_EQ(d.at("pair").at("separation"), false);
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(d.at("target_approx"), "129.25");
    auto p = hi_run({"pair", fixture("paper_bundle.json"), "--params", fixture("paper_params.json")}).doc();
    EXPECT_EQ(p.at("pair").at("identity"), true);
    EXPECT_EQ(p.at("pair").at("identity_value"), "1/3722220101");
}

TEST_F(Cli, SuiteGatesAndNames) {
    auto r = hi_run({"suite", "--count", "10"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto d = r.doc();
    EXPECT_EQ(d.at("all_ok"), true);
    ASSERT_EQ(d.at("systems").size(), 2u);
    for (const auto& s : d.at("systems")) {
        EXPECT_EQ(s.at("random").at("upper_l2").at("pass"), 10);
        EXPECT_EQ(s.at("random").at("asymptotic").at("pass"), 10);
        for (const auto& row : s.at("estimates")) {
            if (row.at("negative").get<bool>()) EXPECT_EQ(row.at("verdict"), "INVALID");
            if (row.at("verdict") == "INCONCLUSIVE")
                EXPECT_NE(row.at("result").at("detail").get<std::string>().find("violated regime hypotheses"),
                          std::string::npos);
        }
    }
    auto one = hi_run({"suite", "--estimates", "big_weight,upper_l2", "--params", fixture("paper_params.json"),
                       "--count", "3"});
    ASSERT_EQ(one.code, 0) << one.err;
    auto sys = one.doc().at("systems");
    ASSERT_EQ(sys.size(), 1u);
    EXPECT_EQ(sys[0].at("params"), "paper_faithful");
    EXPECT_FALSE(sys[0].at("random").contains("asymptotic"));
    for (const auto& row : sys[0].at("estimates")) EXPECT_EQ(row.at("estimate"), "big_weight");
    EXPECT_EQ(hi_run({"suite", "--estimates", "no_such_estimate"}).code, 2);
}

TEST_F(Cli, ReplayReproducesNormOutputs) {
    auto rec = hi_run({"--manifest", path("m.json"), "norm", fixture("toy_vector.json"), "--params",
                       fixture("toy_params.json"), "-o", path("c.json")});
    ASSERT_EQ(rec.code, 0) << rec.err;
    auto m = io::read_json(path("m.json"));
    EXPECT_EQ(m.at("kind"), "run_manifest");
    EXPECT_EQ(m.at("tool_version"), cli::kToolVersion);
    EXPECT_EQ(m.at("params_path"), fixture("toy_params.json"));
    EXPECT_EQ(m.at("inputs").size(), 2u);
    EXPECT_EQ(m.at("outputs").size(), 1u);
    fs::remove(path("c.json"));
    auto rep = hi_run({"replay", path("m.json")});
    ASSERT_EQ(rep.code, 0) << rep.err << rep.out;
    EXPECT_EQ(rep.doc().at("identical"), true);
    // Replay writes to a scratch location, never to the recorded output path.
    EXPECT_FALSE(fs::exists(path("c.json")));

    auto wrong = m;
    wrong["outputs"][0]["digest"] = "0000000000000000";
    io::write_text(path("w.json"), io::dump(wrong));
    EXPECT_EQ(hi_run({"replay", path("w.json")}).code, 1);
    wrong = m;
    wrong["stdout_digest"] = "0000000000000000";
    io::write_text(path("w.json"), io::dump(wrong));
    EXPECT_EQ(hi_run({"replay", path("w.json")}).code, 1);
    EXPECT_EQ(hi_run({"--manifest", path("mm.json"), "replay", path("m.json")}).code, 2);
}

TEST_F(Cli, ReplayRestoresRegistryState) {
    auto reg = fresh_registry("r.jsonl");
    ::setenv(cli::kRegistryEnv, reg.c_str(), 1);
    auto rec = hi_run({"--manifest", path("m.json"), "witness", "build", "--params", fixture("toy_params.json"),
                       "--fixture", "toy", "-o", path("b.json")});
    ASSERT_EQ(rec.code, 0) << rec.err;
    auto m = io::read_json(path("m.json"));
    EXPECT_EQ(m.at("registry_path"), reg);
    EXPECT_TRUE(m.at("registry_state").empty());
    // Mutate the live registry and the environment; replay uses the recorded state.
    io::write_text(reg, io::read_text(fixture("toy_registry.jsonl")));
    ::unsetenv(cli::kRegistryEnv);
    auto rep = hi_run({"replay", path("m.json")});
    ASSERT_EQ(rep.code, 0) << rep.err << rep.out;
    EXPECT_EQ(rep.doc().at("identical"), true);
    EXPECT_EQ(io::read_text(reg), io::read_text(fixture("toy_registry.jsonl")));
}

TEST_F(Cli, ReplayRejectsChangedInputs) {
    io::write_text(path("v.json"), io::read_text(fixture("toy_vector.json")));
    ASSERT_EQ(hi_run({"--manifest", path("m.json"), "norm", path("v.json"), "--params", fixture("toy_params.json")}).code,
              0);
    io::write_text(path("v.json"), io::dump(io::vector_to_json(SparseVector::unit(2))));
    auto r = hi_run({"replay", path("m.json")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("input changed"), std::string::npos);
}

TEST_F(Cli, ReplayOfSuiteWithSeed) {
    ASSERT_EQ(hi_run({"--manifest", path("m.json"), "suite", "--estimates", "upper_l2,asymptotic", "--seed", "17",
                      "--count", "5"})
                  .code,
              0);
    EXPECT_EQ(io::read_json(path("m.json")).at("seed"), "17");
    EXPECT_EQ(hi_run({"replay", path("m.json")}).code, 0);
}
