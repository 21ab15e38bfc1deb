#include "ottolab/error.hpp"
#include "ottolab/scenarios.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace ottolab;

namespace {

void print_checks(const RunResult& r)
{
    for (auto& c : r.checks)
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.operation << "): " << io::format_double(c.value)
                  << " " << c.relation << " " << io::format_double(c.threshold) << "\n";
}

int report(const std::exception& e)
{
    if (const auto* nf = dynamic_cast<const NumericalFailure*>(&e)) {
        std::cerr << "numerical-failure: " << nf->reason() << "\n  solver report: iterations " << nf->iterations()
                  << ", residual " << io::format_double(nf->residual()) << "\n";
        return 3;
    }
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        std::cerr << to_string(err->kind()) << ": " << err->message() << "\n";
        return exit_code(err->kind());
    }
    std::cerr << "error: " << e.what() << "\n";
    return 2;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Numerical experiments in Otto calculus on the flat torus"};
    app.require_subcommand(1);

    std::string config, out;
    auto* run = app.add_subcommand("run", "Run a scenario from a JSON config");
    run->add_option("config", config, "Scenario config file")->required();
    run->add_option("--out", out, "Output directory")->required();

    std::string a, b;
    double rel_tol = 0.0;
    auto* cmp = app.add_subcommand("compare", "Diff two run manifests (or run directories)");
    cmp->add_option("A", a, "First run")->required();
    cmp->add_option("B", b, "Second run")->required();
    cmp->add_option("--rel-tol", rel_tol, "Relative tolerance for numeric fields")->check(CLI::NonNegativeNumber);

    auto* list = app.add_subcommand("list-scenarios", "Print the scenario names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (list->parsed()) {
            for (auto& s : scenario_names()) {
                std::cout << s << ":";
                for (auto& c : check_names(s)) std::cout << " " << c;
                std::cout << "\n";
            }
            return 0;
        }
        if (run->parsed()) {
            ScenarioConfig cfg = load_config(config);
            RunResult r = run_scenario(cfg, out);
            print_checks(r);
            return r.passed() ? 0 : 1;
        }
        DiffReport d = compare_runs(a, b, rel_tol);
        std::cout << io::dump_json(d.to_json());
        return 0;
    } catch (const std::exception& e) {
        return report(e);
    }
}
