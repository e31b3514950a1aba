#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ezsdu/error.hpp"
#include "ezsdu/scenario.hpp"

namespace {

int fail(const std::string& code, const std::string& message, int status) {
    std::cerr << ezsdu::error_json(code, message, status).dump() << '\n';
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recursive-utility experiments driven by scenario files"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Suppress normal output on stdout");

    std::string scenario_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "Run the experiment named in a scenario file");
    run->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    run->add_option("--out-dir", out_dir, "Directory for CSV, JSON and manifest outputs")->capture_default_str();
    run->add_option("--seed", seed, "Override the scenario seed");
    run->fallthrough();

    auto* list = app.add_subcommand("list", "List the experiment catalog");
    list->fallthrough();

    auto* validate = app.add_subcommand("validate", "Check a scenario file without running it");
    validate->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    validate->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("ParseError", e.what(), 2);
    }

    try {
        if (*list) {
            if (!quiet) std::cout << ezsdu::catalog_json().dump(2) << '\n';
            return 0;
        }
        ezsdu::Scenario scenario = ezsdu::load_scenario(scenario_path);
        if (seed) scenario.seed = *seed;
        if (*validate) {
            if (!quiet) {
                const nlohmann::json doc{{"valid", true},
                                         {"id", scenario.id},
                                         {"experiment", scenario.experiment},
                                         {"input_hash", ezsdu::input_hash(scenario)}};
                std::cout << doc.dump(2) << '\n';
            }
            return 0;
        }
        const auto manifest = ezsdu::run_scenario(scenario, out_dir);
        if (!quiet) std::cout << ezsdu::to_json(manifest).dump(2) << '\n';
        return 0;
    } catch (const ezsdu::Error& e) {
        return fail(std::string(ezsdu::to_string(e.code())), e.detail(), ezsdu::exit_code(e.code()));
    } catch (const std::bad_alloc&) {
        return fail("NumericFailure", "out of memory", 3);
    } catch (const std::exception& e) {
        return fail("NumericFailure", e.what(), 3);
    }
}
