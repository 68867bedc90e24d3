#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "largesol/config.hpp"
#include "largesol/errors.hpp"
#include "largesol/run.hpp"

using namespace largesol;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("largesol_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

int parse_error_line(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return -1;
}

}  // namespace

TEST(ParseConfig, MinimalKoCheckFillsDefaults) {
    ExperimentConfig c = parse_config_text("[g]\nfamily = power\nq = 3\n[run]\nmode = ko-check\n");
    EXPECT_EQ(c.mode, Mode::KoCheck);
    EXPECT_EQ(c.g_q, 3.0);
    EXPECT_EQ(c.tol, 1e-4);
    EXPECT_EQ(c.ko_base, 1.0);
    EXPECT_EQ(c.output_dir, "out");
}

TEST(ParseConfig, PowersOfTwoAndComments) {
    ExperimentConfig c = parse_config_text(
        "# header\n[domain]\nshape = disk(0,0,1)  # unit disk\nh = 2^-7\n[run]\nmode = maximal\n");
    EXPECT_EQ(c.h, 1.0 / 128.0);
    EXPECT_EQ(c.shape, "disk(0,0,1)");
}

TEST(ParseConfig, DuplicateKeyNamesTheLine) {
    const std::string text = "[g]\nq = 3\nq = 5\n[run]\nmode = ko-check\n";
    EXPECT_EQ(parse_error_line(text), 3);
    try {
        parse_config_text(text);
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(ParseConfig, Errors) {
    EXPECT_EQ(parse_error_line("[g]\nqq = 3\n[run]\nmode = ko-check\n"), 2);
    EXPECT_EQ(parse_error_line("[g]\nq 3\n"), 2);
    EXPECT_EQ(parse_error_line("[nope]\n"), 1);
    EXPECT_EQ(parse_error_line("[g]\nq = three\n[run]\nmode = ko-check\n"), 2);
    EXPECT_EQ(parse_error_line("[run]\nmode = ko-check\nbdata = 1\n"), 3);
    EXPECT_THROW(parse_config_text("[g]\nq = 3\n"), ParseError);
    EXPECT_THROW(parse_config_text("[run]\nmode = maximal\n"), ParseError);
    EXPECT_THROW(parse_config_text("[run]\nmode = ko-check\ntol = 0\n"), ParseError);
    EXPECT_THROW(parse_config("/nonexistent/file.cfg"), ParseError);
}

TEST(Run, KoCheckWritesSummary) {
    const fs::path out = scratch("ko");
    ExperimentConfig c = parse_config_text("[g]\nfamily = power\nq = 3\n[run]\nmode = ko-check\n");
    c.output_dir = out.string();
    std::ostringstream err;
    EXPECT_EQ(run(c, err), kExitOk);
    nlohmann::json s = read_json(out / "summary.json");
    EXPECT_EQ(s["mode"], "ko-check");
    EXPECT_NEAR(s["results"]["ko_value"].get<double>(), 2.0, 1e-6);
    EXPECT_TRUE(s.contains("wall_time_s"));
}

TEST(Run, LinearLikePowerRefusedWithPreconditionCode) {
    const fs::path out = scratch("linear");
    ExperimentConfig c = parse_config_text(
        "[g]\nfamily = power\nq = 1\n[domain]\nshape = interval(0,1)\nh = 2^-4\n[run]\nmode = maximal\n");
    c.output_dir = out.string();
    std::ostringstream err;
    EXPECT_EQ(run(c, err), kExitPrecondition);
    nlohmann::json s = read_json(out / "summary.json");
    EXPECT_NE(s["results"]["error"].get<std::string>().find("Keller"), std::string::npos);
}

TEST(Run, GapReportsMonotone) {
    const fs::path out = scratch("gap");
    ExperimentConfig c = parse_config_text(
        "[domain]\nshape = disk(0,0,1)\nh = 2^-3\n[f]\nexpr = 1\n[run]\nmode = gap\ntol = 1e-3\n");
    c.output_dir = out.string();
    std::ostringstream err;
    ASSERT_EQ(run(c, err), kExitOk);
    nlohmann::json s = read_json(out / "summary.json");
    EXPECT_TRUE(s["results"]["monotone_ok"].get<bool>());
    EXPECT_TRUE(fs::exists(out / "field.dat"));
}

TEST(Run, FieldFileIsDeterministicAndRoundTrips) {
    const std::string text =
        "[domain]\nshape = disk(0,0,1)\nh = 2^-4\n[f]\nexpr = 1 + rho_power(1)\n[run]\nmode = maximal\n";
    std::string bytes[2];
    for (int i = 0; i < 2; ++i) {
        const fs::path out = scratch("det" + std::to_string(i));
        ExperimentConfig c = parse_config_text(text);
        c.output_dir = out.string();
        std::ostringstream err;
        ASSERT_EQ(run(c, err), kExitOk);
        std::ifstream in(out / "field.dat", std::ios::binary);
        bytes[i].assign(std::istreambuf_iterator<char>(in), {});
    }
    EXPECT_FALSE(bytes[0].empty());
    EXPECT_EQ(bytes[0], bytes[1]);

    ExperimentConfig c = parse_config_text(text);
    RunOutcome o = execute(c);
    ASSERT_TRUE(o.field);
    std::istringstream in(bytes[0]);
    Field back = read_field(in, o.field->domain());
    EXPECT_EQ(back.values(), o.field->values());
}

TEST(Run, OracleWritesProfile) {
    const fs::path out = scratch("oracle");
    ExperimentConfig c = parse_config_text(
        "[f]\nexpr = 0\n[run]\nmode = oracle\nN = 1\ngeometry = halfline\nL = 1\nfar_value = 1.4142135623730951\n"
        "samples = 5\nr_min = 0.2\n");
    c.output_dir = out.string();
    std::ostringstream err;
    ASSERT_EQ(run(c, err), kExitOk);
    std::ifstream in(out / "profile.csv");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    EXPECT_EQ(header, "r,u");
    EXPECT_NEAR(std::stod(first.substr(first.find(',') + 1)), std::sqrt(2.0) / 0.2, 1e-6);
}

TEST(Run, BvpFlagsDivergence) {
    ExperimentConfig c = parse_config_text(
        "[domain]\nshape = interval(0,1)\nh = 2^-12\n[f]\nexpr = rho_power(3)\n[run]\nmode = bvp\n");
    RunOutcome o = execute(c);
    EXPECT_TRUE(o.summary["diverged"].get<bool>());
}

TEST(JsonNumber, Infinities) {
    EXPECT_EQ(json_number(INFINITY), "inf");
    EXPECT_EQ(json_number(-INFINITY), "-inf");
    EXPECT_EQ(json_number(1.5), 1.5);
}
