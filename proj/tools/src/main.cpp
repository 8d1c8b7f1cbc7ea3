// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace tworay::cli;

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv, argv + argc);
    CLI::App app{"Two-ray fading models: synthesis, fitting and evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", TWORAY_VERSION);

    SynthOptions synth;
    auto* s = app.add_subcommand("synth", "Synthesize the 1089 channels of a scenario");
    s->add_option("--scenario", synth.scenario, "anechoic, reverberation or indoor")->required();
    s->add_option("--seed", synth.seed, "Random seed")->default_val(0);
    s->add_option("-o,--out", synth.out_dir, "Output directory")->required();
    s->add_flag("--text", synth.text, "Also write a CSV export of the responses");

    MergeFitOptions mf;
    mf.jobs = default_jobs();
    auto* m = app.add_subcommand("merge-fit", "Merge channel pairs and fit a fading model to each");
    m->add_option("-i,--input", mf.inputs, "Channel set files (default: synthesize)");
    m->add_option("--scenario", mf.scenarios, "Scenarios to synthesize when no input is given");
    m->add_option("--seed", mf.seed, "Random seed")->default_val(0);
    m->add_option("--configs", mf.configs, "Configurations drawn per scenario")->default_val(142);
    m->add_option("--only", mf.only, "Restrict to these configuration ids")->delimiter(',');
    m->add_option("--model", mf.model, "iftr or gtrv")->default_val("iftr");
    m->add_option("--population", mf.population)->default_val(200);
    m->add_option("--generations", mf.generations)->default_val(400);
    m->add_option("--elite", mf.elite, "Elite fraction")->default_val(0.05);
    m->add_option("--stall-window", mf.stall_window)->default_val(100);
    m->add_option("--stall-tolerance", mf.stall_tolerance)->default_val(1e-6);
    m->add_option("--k-min-db", mf.k_min_db, "Lower K bound (default: linear 0)");
    m->add_option("--k-max-db", mf.k_max_db)->default_val(30.0);
    m->add_option("--m-min", mf.m_min)->default_val(0.05);
    m->add_option("--m-max", mf.m_max)->default_val(50.0);
    m->add_option("--pdf-points", mf.pdf_points)->default_val(100);
    m->add_option("--phase-bins", mf.phase_bins)->default_val(64);
    m->add_option("-j,--jobs", mf.jobs, "Concurrent fits (default: TWORAY_JOBS or 1)");
    m->add_option("-o,--out", mf.out_dir, "Output directory")->required();

    EvalOptions ev;
    auto* e = app.add_subcommand("eval", "Tabulate a density");
    e->add_option("model", ev.model, "iftr, gtrv, rician or vonmises")->required();
    auto* kdb = e->add_option("--k-db", ev.k_db, "K in dB");
    e->add_option("--k", ev.k, "K, linear")->excludes(kdb);
    e->add_option("--delta", ev.delta)->default_val(0.0);
    e->add_option("--m1", ev.m1)->default_val(1.0);
    e->add_option("--m2", ev.m2)->default_val(1.0);
    e->add_option("--omega", ev.omega)->default_val(1.0);
    e->add_option("--kappa", ev.kappa)->default_val(0.0);
    e->add_option("--phi", ev.phi)->default_val(0.0);
    e->add_option("--min", ev.x_min, "First abscissa");
    e->add_option("--max", ev.x_max, "Last abscissa");
    e->add_option("--points", ev.points, "Number of abscissae");
    e->add_option("--seed", "Accepted for uniformity; evaluation is deterministic");
    e->add_option("-o,--out", ev.out_dir, "Output directory (default: stdout)");

    ReportOptions rp;
    auto* r = app.add_subcommand("report", "Summarize a merge-fit run");
    r->add_option("-i,--input", rp.input, "merge-fit output directory or results.csv")->required();
    r->add_option("--seed", "Accepted for uniformity; reports are deterministic");
    r->add_option("-o,--out", rp.out_dir, "Output directory (default: stdout only)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (s->parsed()) return cmd_synth(synth, args);
        if (m->parsed()) return cmd_merge_fit(mf, args);
        if (e->parsed()) return cmd_eval(ev, args);
        if (r->parsed()) return cmd_report(rp, args);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return kExitRuntime;
    }
    return kExitInput;
}
