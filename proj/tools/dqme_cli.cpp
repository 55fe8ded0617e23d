// Command-line front end: decompose, run, oracle, field, sweep.

#include <cstdio>
#include <exception>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <dqme/harness.hpp>

namespace
{

enum ExitCode
{
    exit_ok          = 0,
    exit_config      = 2,
    exit_numerical   = 3,
    exit_convergence = 4,
};

std::vector<int> parse_l_sweep(const std::string& text)
{
    std::vector<int> tiers;
    if (text.empty())
        return tiers;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        std::size_t used = 0;
        int L            = -1;
        try
        {
            L = std::stoi(item, &used);
        }
        catch (const std::exception&)
        {
            used = 0;
        }
        if (used != item.size() || L < 0)
            throw dqme::InputError("--l-sweep expects non-negative integers such as 6,7, got '" + text + "'");
        tiers.push_back(L);
    }
    return tiers;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dissipaton equation of motion solver"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", l_sweep;
    unsigned long seed = 0;

    auto add_common = [&](CLI::App* sub, bool with_sweep) {
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "reserved; the dynamics are deterministic");
        if (with_sweep)
            sub->add_option("--l-sweep", l_sweep, "extra truncation tiers, e.g. 6,7");
    };

    auto* decompose = app.add_subcommand("decompose", "exponential decomposition of the bath correlation");
    auto* run       = app.add_subcommand("run", "propagate and write moments, fields and a summary");
    auto* oracle    = app.add_subcommand("oracle", "compare a pure-dephasing run with the exact coherence");
    auto* field     = app.add_subcommand("field", "dissipaton field slice and steady-state identities");
    auto* sweep     = app.add_subcommand("sweep", "one run per value of the configured sweep parameter");
    add_common(decompose, false);
    add_common(run, true);
    add_common(oracle, false);
    add_common(field, false);
    add_common(sweep, true);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try
    {
        const dqme::RunConfig config = dqme::load_run_config(config_path);
        const std::vector<int> tiers = parse_l_sweep(l_sweep);

        dqme::CommandStatus status;
        if (decompose->parsed())
            status = dqme::decompose_command(config, out_dir);
        else if (run->parsed())
            status = dqme::run_command(config, out_dir, tiers);
        else if (oracle->parsed())
            status = dqme::oracle_command(config, out_dir);
        else if (field->parsed())
            status = dqme::field_command(config, out_dir);
        else
            status = dqme::sweep_command(config, out_dir, tiers);

        if (!status.converged)
        {
            std::fprintf(stderr, "convergence inconclusive: %s\n", status.message.c_str());
            return exit_convergence;
        }
        return exit_ok;
    }
    catch (const dqme::InputError& e)
    {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_config;
    }
    catch (const dqme::ConvergenceError& e)
    {
        std::fprintf(stderr, "convergence inconclusive: %s\n", e.what());
        return exit_convergence;
    }
    catch (const dqme::NumericalError& e)
    {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return exit_numerical;
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return exit_numerical;
    }
}
