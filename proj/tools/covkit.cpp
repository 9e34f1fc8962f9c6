#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "covkit/cli/commands.hpp"

int main(int argc, char** argv) {
    using namespace covkit::cli;
    CLI::App app{"Limited-range coverage optimization for planar agent networks"};
    app.require_subcommand(1);

    CommandOptions opt;
    std::string out_dir, format;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("scenario", opt.scenario_path, "Scenario file")->required();
        sub->add_option("--out", out_dir, "Output directory (default: outputs.dir from the scenario)");
        sub->add_option("--seed", seed, "Override agents.seed");
        sub->add_option("--format", format, "Report format on stdout")->check(CLI::IsMember({"csv", "json"}));
    };

    auto* validate = app.add_subcommand("validate", "Check a scenario and report domain constants");
    auto* eval = app.add_subcommand("eval", "Evaluate H, gradients and approximation bounds at the initial agents");
    auto* graphs = app.add_subcommand("graphs", "Write the six proximity graphs as edge lists");
    auto* run = app.add_subcommand("run", "Run the ascent algorithm and write trajectory and metrics CSVs");
    auto* render = app.add_subcommand("render", "Write an SVG snapshot of one frame");
    for (auto* sub : {validate, eval, graphs, run, render}) add_common(sub);
    run->add_flag("--assert-monotone", opt.assert_monotone, "Fail (exit 1) if H ever decreases");
    render->add_option("--frame", opt.frame, "initial, final or a step index")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    CLI::App* chosen = app.get_subcommands().front();
    if (chosen->count("--out")) opt.out_dir = out_dir;
    if (chosen->count("--seed")) opt.seed = seed;
    if (chosen->count("--format")) opt.format = format;
    return dispatch(chosen->get_name(), opt, std::cout, std::cerr);
}
