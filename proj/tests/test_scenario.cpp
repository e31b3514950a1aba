#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "ezsdu/error.hpp"
#include "ezsdu/report_io.hpp"
#include "ezsdu/scenario.hpp"

using namespace ezsdu;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json base_document() {
    return json::parse(R"({
      "schema_version": 1,
      "id": "unit-P1",
      "preferences": {"b": 1, "delta": 0.03, "R": 2, "S": 2.5},
      "market": {"r": 0.02, "mu": 0.07, "sigma": 0.2},
      "experiment": {"name": "candidate_policy", "params": {}},
      "seed": 7
    })");
}

Error parse_error(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const Error& e) {
        return e;
    }
    ADD_FAILURE() << "expected parse failure";
    return Error(ErrorCode::ExperimentError, "none");
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("ezsdu_test_" + name);
    fs::remove_all(dir);
    return dir;
}

struct CliResult {
    int status;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const std::string& tag) {
    const fs::path dir = fresh_dir("cli_capture_" + tag);
    fs::create_directories(dir);
    const std::string cmd = std::string("\"") + EZSDU_CLI_PATH + "\" " + args + " > \"" + (dir / "out").string() +
                            "\" 2> \"" + (dir / "err").string() + "\"";
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, read_text_file(dir / "out"), read_text_file(dir / "err")};
}

std::string write_scenario(const json& doc, const std::string& name) {
    const fs::path dir = fresh_dir("scn_" + name);
    fs::create_directories(dir);
    const fs::path path = dir / (name + ".json");
    write_text_file(path, doc.dump());
    return path.string();
}

}  // namespace

TEST(ScenarioParse, AcceptsMinimalDocumentAndFillsDefaults) {
    const Scenario s = parse_scenario(base_document().dump());
    EXPECT_EQ(s.id, "unit-P1");
    EXPECT_EQ(s.preferences.S(), 2.5);
    EXPECT_EQ(s.market.sigma(), 0.2);
    EXPECT_EQ(s.lattice.n_steps, 500);
    EXPECT_EQ(s.lattice.tail, "proportional");
    EXPECT_EQ(s.solver.tol, 1e-8);
    EXPECT_EQ(s.seed, 7u);
}

TEST(ScenarioParse, MalformedJsonIsAParseError) {
    EXPECT_EQ(parse_error("{\"id\": ").code(), ErrorCode::ParseError);
}

TEST(ScenarioParse, ValidationNamesTheField) {
    auto doc = base_document();
    doc["preferences"]["S"] = 1.0;
    auto e = parse_error(doc.dump());
    EXPECT_EQ(e.code(), ErrorCode::ValidationError);
    EXPECT_NE(e.detail().find("preferences.S"), std::string::npos);

    doc = base_document();
    doc["market"].erase("sigma");
    EXPECT_NE(parse_error(doc.dump()).detail().find("market.sigma"), std::string::npos);

    doc = base_document();
    doc["id"] = "has space";
    EXPECT_NE(parse_error(doc.dump()).detail().find("id"), std::string::npos);

    doc = base_document();
    doc["schema_version"] = 2;
    EXPECT_NE(parse_error(doc.dump()).detail().find("schema_version"), std::string::npos);

    doc = base_document();
    doc["lattice"] = {{"tail", "linear"}};
    EXPECT_NE(parse_error(doc.dump()).detail().find("lattice.tail"), std::string::npos);

    doc = base_document();
    doc["experiment"]["name"] = "nope";
    EXPECT_NE(parse_error(doc.dump()).detail().find("experiment.name"), std::string::npos);

    doc = base_document();
    doc["experiment"]["params"] = {{"welth", 2.0}};
    EXPECT_NE(parse_error(doc.dump()).detail().find("experiment.params.welth"), std::string::npos);

    doc = base_document();
    doc["seed"] = -1;
    EXPECT_NE(parse_error(doc.dump()).detail().find("seed"), std::string::npos);

    doc = base_document();
    doc["extra"] = true;
    EXPECT_EQ(parse_error(doc.dump()).code(), ErrorCode::ValidationError);
}

TEST(ScenarioCanonical, RoundTripAndHash) {
    const Scenario s = parse_scenario(base_document().dump());
    const json canonical = to_json(s);
    const Scenario again = parse_scenario(canonical.dump());
    EXPECT_EQ(to_json(again).dump(), canonical.dump());
    EXPECT_EQ(input_hash(s), input_hash(again));
    EXPECT_EQ(input_hash(s).size(), 64u);
    Scenario reseeded = s;
    reseeded.seed = 8;
    EXPECT_NE(input_hash(reseeded), input_hash(s));
}

TEST(Catalog, SortedAndComplete) {
    const auto& cat = experiment_catalog();
    ASSERT_EQ(cat.size(), 12u);
    for (std::size_t i = 1; i < cat.size(); ++i) EXPECT_LT(cat[i - 1].name, cat[i].name);
    for (const auto& e : cat) {
        EXPECT_FALSE(e.anchor.empty());
        EXPECT_FALSE(e.description.empty());
    }
    EXPECT_EQ(catalog_json().size(), 12u);
    for (const std::string name : {"crra_counterexample", "ezsdu_counterexample", "transversality_sweep",
                                   "policy_grid_search", "aversion_demos", "wellposed_divergence",
                                   "verification_check"}) {
        EXPECT_EQ(std::count_if(cat.begin(), cat.end(), [&](const CatalogEntry& e) { return e.name == name; }), 1)
            << name;
    }
}

TEST(Execute, CandidatePolicySummary) {
    const auto out = execute(parse_scenario(base_document().dump()));
    EXPECT_NEAR(out.summary.at("pi_hat").get<double>(), 0.625, 1e-15);
    EXPECT_EQ(out.summary.at("regime"), "Contractive");
    EXPECT_EQ(out.table.columns(), (std::vector<std::string>{"quantity", "value"}));
}

TEST(Execute, NonFiniteNumbersBecomeStrings) {
    auto doc = base_document();
    doc["preferences"]["delta"] = -0.06;
    doc["experiment"] = {{"name", "wellposed_divergence"}, {"params", {{"schedule", {1, 10, 100}}}}};
    const auto out = execute(parse_scenario(doc.dump()));
    EXPECT_EQ(out.summary.at("xi_star"), "nan");
    EXPECT_EQ(out.summary.at("verdict"), "Finite");
}

TEST(Execute, PicardSummaryAndConvergenceTable) {
    auto doc = base_document();
    doc["experiment"] = {{"name", "picard_solve"}, {"params", json::object()}};
    doc["lattice"] = {{"dt", 0.05}, {"n_steps", 100}};
    const auto out = execute(parse_scenario(doc.dump()));
    EXPECT_TRUE(out.summary.at("V0").is_number());
    EXPECT_EQ(out.summary.at("classification"), "Solution");
    EXPECT_NE(out.table.str().find("1,"), std::string::npos);
    EXPECT_NE(out.table.str().find(",nan\n"), std::string::npos);
}

TEST(Execute, ExperimentFailuresKeepTheirCodes) {
    auto doc = base_document();
    doc["experiment"] = {{"name", "wellposed_divergence"}, {"params", json::object()}};
    try {
        execute(parse_scenario(doc.dump()));
        FAIL() << "expected WellPosed";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::WellPosed);
        EXPECT_EQ(exit_code(e.code()), 3);
    }
}

TEST(Run, WritesArtifactsAndIsByteStable) {
    auto doc = base_document();
    doc["experiment"] = {{"name", "mc_drift_check"}, {"params", {{"n_paths", 5000}, {"horizon", 2.0}}}};
    const Scenario s = parse_scenario(doc.dump());
    const fs::path a = fresh_dir("run_a"), b = fresh_dir("run_b");
    const auto manifest = run_scenario(s, a);
    run_scenario(s, b);
    ASSERT_EQ(manifest.outputs.size(), 2u);
    EXPECT_EQ(manifest.outputs[0], "mc_drift_check_unit-P1.csv");
    EXPECT_EQ(manifest.input_hash, input_hash(s));
    EXPECT_TRUE(fs::exists(a / "mc_drift_check_unit-P1.manifest.json"));
    for (const auto& name : manifest.outputs) {
        EXPECT_EQ(read_text_file(a / name), read_text_file(b / name)) << name;
    }
    const auto m = json::parse(read_text_file(a / "mc_drift_check_unit-P1.manifest.json"));
    EXPECT_EQ(m.at("scenario_id"), "unit-P1");
    EXPECT_EQ(m.at("artifact_version"), kArtifactVersion);
    EXPECT_TRUE(m.at("wall_clock_seconds").is_number());
}

TEST(Run, UnwritableDirectoryIsAnIoError) {
    const fs::path blocker = fresh_dir("blocker");
    write_text_file(blocker, "file");
    try {
        run_scenario(parse_scenario(base_document().dump()), blocker / "sub");
        FAIL() << "expected IoError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IoError);
    }
}

TEST(Cli, ListPrintsCatalog) {
    const auto r = run_cli("list", "list");
    EXPECT_EQ(r.status, 0);
    EXPECT_EQ(json::parse(r.out).size(), 12u);
}

TEST(Cli, ValidateReportsHash) {
    const auto path = write_scenario(base_document(), "validate_ok");
    const auto r = run_cli("validate --scenario \"" + path + "\"", "validate_ok");
    EXPECT_EQ(r.status, 0);
    const auto doc = json::parse(r.out);
    EXPECT_TRUE(doc.at("valid").get<bool>());
    EXPECT_EQ(doc.at("input_hash"), input_hash(parse_scenario(base_document().dump())));
}

TEST(Cli, ValidationFailureExitsTwoWithErrorJson) {
    auto doc = base_document();
    doc["preferences"]["R"] = "two";
    const auto path = write_scenario(doc, "validate_bad");
    const auto r = run_cli("validate --scenario \"" + path + "\"", "validate_bad");
    EXPECT_EQ(r.status, 2);
    const auto err = json::parse(r.err).at("error");
    EXPECT_EQ(err.at("code"), "ValidationError");
    EXPECT_EQ(err.at("exit_code"), 2);
    EXPECT_NE(err.at("message").get<std::string>().find("preferences.R"), std::string::npos);
}

TEST(Cli, UnknownOptionExitsTwo) {
    const auto r = run_cli("run --bogus", "bogus");
    EXPECT_EQ(r.status, 2);
    EXPECT_EQ(json::parse(r.err).at("error").at("code"), "ParseError");
}

TEST(Cli, NumericFailureExitsThree) {
    auto doc = base_document();
    doc["experiment"] = {{"name", "wellposed_divergence"}, {"params", json::object()}};
    const auto path = write_scenario(doc, "numeric");
    const auto r = run_cli("run --scenario \"" + path + "\" --out-dir \"" + fresh_dir("numeric_out").string() + "\"",
                           "numeric");
    EXPECT_EQ(r.status, 3);
    EXPECT_EQ(json::parse(r.err).at("error").at("code"), "WellPosed");
}

TEST(Cli, MissingScenarioFileExitsFour) {
    const auto r = run_cli("validate --scenario /nonexistent/scenario.json", "missing");
    EXPECT_EQ(r.status, 4);
    EXPECT_EQ(json::parse(r.err).at("error").at("code"), "IoError");
}

TEST(Cli, RunIsReproducibleAndSeedOverrides) {
    const std::string scenario = std::string(EZSDU_SCENARIO_DIR) + "/candidate_policy_P1.json";
    const fs::path a = fresh_dir("cli_a"), b = fresh_dir("cli_b");
    EXPECT_EQ(run_cli("run --scenario \"" + scenario + "\" --out-dir \"" + a.string() + "\" --quiet", "a").status, 0);
    const auto second = run_cli("run --scenario \"" + scenario + "\" --out-dir \"" + b.string() + "\"", "b");
    EXPECT_EQ(second.status, 0);
    EXPECT_EQ(read_text_file(a / "candidate_policy_P1.csv"), read_text_file(b / "candidate_policy_P1.csv"));
    EXPECT_EQ(read_text_file(a / "candidate_policy_P1.json"), read_text_file(b / "candidate_policy_P1.json"));
    EXPECT_EQ(json::parse(second.out).at("scenario_id"), "P1");

    const fs::path c = fresh_dir("cli_c");
    EXPECT_EQ(run_cli("run --scenario \"" + scenario + "\" --out-dir \"" + c.string() + "\" --seed 99 -q", "c").status,
              0);
    const auto summary = json::parse(read_text_file(c / "candidate_policy_P1.json"));
    EXPECT_EQ(summary.at("seed"), 99);
}

TEST(Cli, ShippedScenariosValidate) {
    for (const auto& entry : fs::directory_iterator(EZSDU_SCENARIO_DIR)) {
        if (entry.path().extension() != ".json") continue;
        EXPECT_NO_THROW(load_scenario(entry.path())) << entry.path();
    }
}
