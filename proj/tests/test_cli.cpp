#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "adlab/serialize.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string output;
};

Outcome run(const std::string& args) {
    const std::string cmd = std::string(ADLAB_CLI_PATH) + " " + args + " 2>&1";
    Outcome out;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return out;
    std::array<char, 4096> buf;
    while (std::fgets(buf.data(), buf.size(), pipe)) out.output += buf.data();
    const int status = pclose(pipe);
    out.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return out;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() / "adlab_cli_tests" /
                ::testing::UnitTest::GetInstance()->current_test_info()->name();
        fs::remove_all(root_);
        fs::create_directories(root_);
        desk_ = (root_ / "desk.json").string();
        adlab::write_text_file(desk_, R"({
  "data": {"d": 30, "N": 20, "P": 3, "p_un": 0.2},
  "network": {"m": 8},
  "train": {"T": 100, "test_count": 20},
  "sweep": {"p_un_values": [0.0, 0.2], "methods": ["AT", "AD-Good"], "seeds": [0]},
  "entropy": {"margins": [0, 10]},
  "jobs": 1
})");
    }
    std::string p(const std::string& name) const { return (root_ / name).string(); }
    fs::path root_;
    std::string desk_;
};

}  // namespace

TEST_F(Cli, GenerateIsReproducible) {
    Outcome a = run("generate -o " + p("g1"));
    ASSERT_EQ(a.code, 0) << a.output;
    EXPECT_NE(a.output.find("N=200"), std::string::npos);
    EXPECT_EQ(run("generate -o " + p("g2")).code, 0);
    EXPECT_EQ(adlab::read_text_file(p("g1") + "/dataset.bin"), adlab::read_text_file(p("g2") + "/dataset.bin"));
    const auto rep = nlohmann::json::parse(adlab::read_text_file(p("g1") + "/event_report.json"));
    EXPECT_EQ(rep["unlearnable_count"], 0);
    EXPECT_TRUE(rep.contains("tool_version"));
    EXPECT_EQ(rep["config"]["data"]["N"], 200);
}

TEST_F(Cli, TrainWritesRunDirectoryAndRefusesClobber) {
    ASSERT_EQ(run("train -c " + desk_ + " -o " + p("r")).code, 0);
    const std::string csv = adlab::read_text_file(p("r") + "/run.csv");
    int rows = 0;
    for (char ch : csv) rows += ch == '\n';
    EXPECT_EQ(rows, 2 + 10);  // comment, header, T / log_every rows
    Outcome again = run("train -c " + desk_ + " -o " + p("r"));
    EXPECT_EQ(again.code, 1);
    EXPECT_NE(again.output.find("exists"), std::string::npos);
    EXPECT_EQ(run("train -c " + desk_ + " -o " + p("r") + " --overwrite").code, 0);
}

TEST_F(Cli, TrainAdGoodRecordsTeacher) {
    ASSERT_EQ(run("train -c " + desk_ + " --method AD-Good -o " + p("g")).code, 0);
    const auto meta = nlohmann::json::parse(adlab::read_text_file(p("g") + "/run.json"));
    EXPECT_EQ(meta["method"], "AD-Good");
    EXPECT_EQ(meta["config"]["teacher"]["kind"], "good");
    EXPECT_EQ(meta["config"]["teacher"]["gamma"], 10.0);
    EXPECT_EQ(meta["config"]["train"]["objective"], "AD");
}

TEST_F(Cli, ValidationErrorsNameTheKey) {
    adlab::write_text_file(p("bad.json"), R"({"train": {"etta": 0.1}})");
    Outcome o = run("train -c " + p("bad.json") + " -o " + p("x"));
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.output.find("train.etta"), std::string::npos) << o.output;
    Outcome s = run("train --set data.alpha=-1 -o " + p("y"));
    EXPECT_EQ(s.code, 2);
    adlab::write_text_file(p("syntax.json"), "{\n \"data\": {\n  \"d\": ,\n }\n}");
    Outcome l = run("generate -c " + p("syntax.json") + " -o " + p("z"));
    EXPECT_EQ(l.code, 2);
    EXPECT_NE(l.output.find("line 3"), std::string::npos) << l.output;
}

TEST_F(Cli, UsageAndDivergenceExitCodes) {
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_EQ(run("train --no-such-flag").code, 1);
    Outcome d = run("train -c " + desk_ + " --set train.eta=1e15 --set network.sigma_0=1 -o " + p("div"));
    EXPECT_EQ(d.code, 3) << d.output;
}

TEST_F(Cli, SweepIdentifyEntropyVerify) {
    ASSERT_EQ(run("sweep -c " + desk_ + " -o " + p("sw")).code, 0);
    int dirs = 0;
    for (const auto& e : fs::directory_iterator(p("sw"))) dirs += e.is_directory();
    EXPECT_EQ(dirs, 4);
    EXPECT_TRUE(fs::exists(p("sw") + "/sweep.csv"));

    for (const char* seed : {"0", "1"})
        ASSERT_EQ(run("train -c " + desk_ + " --set train.seed=" + seed + " -o " + p(std::string("e") + seed)).code, 0);
    Outcome id = run("identify -c " + desk_ + " -o " + p("id") + " " + p("e0") + " " + p("e1"));
    ASSERT_EQ(id.code, 0) << id.output;
    const auto subsets = nlohmann::json::parse(adlab::read_text_file(p("id") + "/subsets.json"));
    EXPECT_EQ(subsets["ensemble_size"], 2);
    for (const auto& i : subsets["estimated_learnable"])
        for (const auto& j : subsets["estimated_unlearnable"]) EXPECT_NE(i, j);

    Outcome ent = run("entropy -c " + desk_ + " -o " + p("ent"));
    ASSERT_EQ(ent.code, 0) << ent.output;
    EXPECT_TRUE(ent.output.find("Spearman") != std::string::npos) << ent.output;
    EXPECT_TRUE(fs::exists(p("ent") + "/entropy.csv"));

    Outcome v = run("verify " + p("e0"));
    EXPECT_EQ(v.code, 0) << v.output;
    fs::copy(p("e1") + "/final_weights.bin", p("e0") + "/final_weights.bin", fs::copy_options::overwrite_existing);
    EXPECT_EQ(run("verify " + p("e0")).code, 4);
}
