#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "spinmachine/harness/acceptance.hpp"

namespace sh = spinmachine::harness;

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria, one line per criterion"};
    std::string selector = "all";
    std::string out;
    sh::AcceptOptions o;
    app.add_option("selector", selector, "suite name or criterion id (c1..c11)");
    app.add_option("--out", out, "directory for counterexample files");
    app.add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", o.seed, "seed for random parameter draws");
    CLI11_PARSE(app, argc, argv);
    try {
        o.out_dir = sh::resolve_output_dir(out, "accept_out");
        bool ok = true;
        for (const auto& id : sh::select_criteria(selector)) {
            sh::CriterionResult r = sh::run_criterion(id, o);
            sh::enforce_runtime(r);
            std::cout << sh::result_line(r) << std::endl;
            ok = ok && r.pass;
        }
        return ok ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
