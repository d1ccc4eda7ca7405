// ptmc: parallel tempering for Ising spin glasses.
//
//   ptmc generate   --qubits 8 --copies 128 --chains 27 --problem-out p.txt --ladder-out t.txt
//   ptmc run        --problem p.txt --ladder t.txt --sweeps 2000 --workers 4 --out results/run
//   ptmc scaling    --qubits 32 --chains 37 --sweeps 2000 --worker-counts 1,2,4,8 --out results/scaling
//   ptmc throughput --problems 8:128:27,16:128:34 --sweeps 500 --out results/size
//   ptmc pack-plan  --chains 111 --processors 30 --block-size 32
//   ptmc resume     --checkpoint run.ckpt --problem p.txt

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <thread>

#include "ptmc/harness.hpp"
#include "ptmc/kernels.hpp"

namespace {

using namespace ptmc;

struct ProblemFlags {
    std::string topology = "random";
    std::string disorder = "pm1";
};

void add_generator_flags(CLI::App& app, cli::GeneratorParams& g, ProblemFlags& f) {
    app.add_option("--qubits", g.qubits, "Qubits per slice")->capture_default_str();
    app.add_option("--copies", g.copies, "Slices in the ring (even)")->capture_default_str();
    app.add_option("--topology", f.topology, "Slice couplings: ring, complete, random")
        ->check(CLI::IsMember({"ring", "complete", "random"}))
        ->capture_default_str();
    app.add_option("--disorder", f.disorder, "Coupling distribution: pm1, gaussian")
        ->check(CLI::IsMember({"pm1", "gaussian"}))
        ->capture_default_str();
    app.add_option("--degree", g.slice.degree, "Target degree for the random topology")->capture_default_str();
    app.add_option("--field-scale", g.slice.field_scale, "Scale of the local fields")->capture_default_str();
    app.add_option("--inter-slice", g.inter_slice_strength, "Coupling between neighbouring slices")
        ->capture_default_str();
}

void apply_problem_flags(cli::GeneratorParams& g, const ProblemFlags& f) {
    static const std::map<std::string, SliceTopology> topologies = {
        {"ring", SliceTopology::Ring}, {"complete", SliceTopology::Complete}, {"random", SliceTopology::Random}};
    g.slice.topology = topologies.at(f.topology);
    g.slice.disorder = f.disorder == "gaussian" ? Disorder::Gaussian : Disorder::PlusMinusOne;
}

struct RunFlags {
    ProblemFlags problem;
    std::string problem_file;
    std::string ladder_file;
    std::string mode = "coarse";
    std::string priority = "normal";
    std::string out;
    std::string checkpoint;
};

void add_run_flags(CLI::App& app, cli::RunConfig& c, RunFlags& f, bool with_problem_file = true) {
    add_generator_flags(app, c.generator, f.problem);
    if (with_problem_file) app.add_option("--problem", f.problem_file, "Problem file (overrides generator flags)");
    app.add_option("--chains", c.chains, "Number of chains")->capture_default_str();
    app.add_option("--t-min", c.t_min, "Coldest temperature")->capture_default_str();
    app.add_option("--t-max", c.t_max, "Hottest temperature")->capture_default_str();
    app.add_option("--ladder", f.ladder_file, "Temperature file, one per line, decreasing");
    app.add_option("--sweeps", c.total_sweeps, "Sweeps per chain")->capture_default_str();
    app.add_option("--sweeps-per-swap", c.sweeps_per_swap, "Sweeps between swap phases")->capture_default_str();
    app.add_option("--seed", c.seed, "Seed for every random stream")->capture_default_str();
    app.add_option("--workers", c.workers, "Worker threads (default: hardware concurrency)")->capture_default_str();
    app.add_option("--mode", f.mode, "coarse: chain per worker; regional: regions per worker")
        ->check(CLI::IsMember({"coarse", "regional"}))
        ->capture_default_str();
    app.add_option("--duty-cycle", c.throttle.duty_cycle, "Fraction of wall time spent computing, (0, 1]")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    app.add_option("--priority", f.priority, "Worker priority: normal, below-normal")
        ->check(CLI::IsMember({"normal", "below-normal"}))
        ->capture_default_str();
    app.add_option("--repetitions", c.repetitions, "Independent repetitions")->capture_default_str();
    app.add_option("--out", f.out, "Prefix for CSV reports");
    app.add_option("--checkpoint", f.checkpoint, "Checkpoint file written during the run");
    app.add_option("--checkpoint-interval", c.checkpoint_interval_seconds, "Seconds between checkpoints")
        ->capture_default_str();
}

void apply_run_flags(cli::RunConfig& c, const RunFlags& f) {
    apply_problem_flags(c.generator, f.problem);
    if (!f.problem_file.empty()) c.problem_file = f.problem_file;
    if (!f.ladder_file.empty()) c.ladder_file = f.ladder_file;
    c.mode = f.mode == "regional" ? SweepMode::Regional : SweepMode::Coarse;
    c.throttle.priority = f.priority == "below-normal" ? WorkerPriority::BelowNormal : WorkerPriority::Normal;
    if (!f.out.empty()) {
        c.out_prefix = f.out;
        if (const auto dir = c.out_prefix->parent_path(); !dir.empty()) std::filesystem::create_directories(dir);
    }
    if (!f.checkpoint.empty()) c.checkpoint = f.checkpoint;
}

void print_run(const cli::RunSummary& s) {
    std::cout << "sites per chain " << s.num_sites << ", chains " << s.final_ensemble.chains.size()
              << ", repetitions " << s.repetitions.size() << '\n';
    const auto& last = s.repetitions.back().report;
    if (last.rounded_up) {
        std::cout << "note: " << last.requested_sweeps << " sweeps rounded up to " << last.scheduled_sweeps << '\n';
    }
    std::cout << std::fixed << std::setprecision(3) << "PT time " << s.pt_seconds.mean << " s (std "
              << s.pt_seconds.stddev << "), total time " << s.total_seconds.mean << " s (std "
              << s.total_seconds.stddev << "), phases " << last.phases << '\n';
}

void write_failure_marker(const std::optional<std::filesystem::path>& prefix, const std::string& what) {
    if (!prefix) return;
    auto marker = *prefix;
    marker += ".FAILED";
    std::ofstream out(marker);
    out << what << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parallel tempering Monte Carlo for Ising spin glasses"};
    app.require_subcommand(1);

    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());

    // generate
    cli::GenerateConfig gen;
    ProblemFlags gen_flags;
    std::string gen_problem_out = "problem.txt";
    std::string gen_ladder_out = "ladder.txt";
    auto* generate = app.add_subcommand("generate", "Write a layered-ring problem and a temperature ladder");
    add_generator_flags(*generate, gen.generator, gen_flags);
    generate->add_option("--chains", gen.chains, "Chains for the ladder")->capture_default_str();
    generate->add_option("--t-min", gen.t_min, "Coldest temperature")->capture_default_str();
    generate->add_option("--t-max", gen.t_max, "Hottest temperature")->capture_default_str();
    generate->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
    generate->add_option("--problem-out", gen_problem_out, "Problem file to write")->capture_default_str();
    generate->add_option("--ladder-out", gen_ladder_out, "Ladder file to write")->capture_default_str();

    // run
    cli::RunConfig run_cfg;
    run_cfg.workers = hw;
    RunFlags run_flags;
    std::string run_resume;
    auto* run = app.add_subcommand("run", "Run parallel tempering and write CSV reports");
    add_run_flags(*run, run_cfg, run_flags);
    run->add_option("--resume", run_resume, "Continue from this checkpoint instead of starting fresh");

    // scaling
    cli::RunConfig scale_cfg;
    RunFlags scale_flags;
    std::vector<std::size_t> worker_counts = {1, 2, 4, 8};
    auto* scaling = app.add_subcommand("scaling", "Speedup of one workload across worker counts");
    add_run_flags(*scaling, scale_cfg, scale_flags);
    scaling->add_option("--worker-counts", worker_counts, "Comma-separated worker counts (must include 1)")
        ->delimiter(',')
        ->capture_default_str();

    // throughput
    cli::RunConfig tp_cfg;
    tp_cfg.workers = hw;
    RunFlags tp_flags;
    std::vector<std::string> tp_problems = {"8:128:27", "16:128:34", "32:128:37", "48:128:57", "72:128:71",
                                            "96:128:111"};
    auto* throughput = app.add_subcommand("throughput", "Variables per second of PT time across problem sizes");
    add_run_flags(*throughput, tp_cfg, tp_flags, false);
    throughput->add_option("--problems", tp_problems, "Comma-separated qubits:copies:chains")
        ->delimiter(',')
        ->capture_default_str();

    // pack-plan
    cli::PackPlanConfig pack;
    pack.registers_per_chain = 2048;
    auto* pack_plan = app.add_subcommand("pack-plan", "Chains-per-block plan for a processor array");
    pack_plan->add_option("--chains", pack.chains, "Chains to place")->capture_default_str();
    pack_plan->add_option("--processors", pack.processors, "Processor blocks available")->capture_default_str();
    pack_plan->add_option("--block-size", pack.block_size, "Threads per chain")->capture_default_str();
    pack_plan->add_option("--max-threads", pack.max_threads_per_block, "Thread limit per block")
        ->capture_default_str();
    pack_plan->add_option("--registers", pack.register_budgets, "Register budgets per block")
        ->delimiter(',')
        ->capture_default_str();
    pack_plan->add_option("--registers-per-chain", pack.registers_per_chain, "Registers used by one chain")
        ->capture_default_str();

    // resume
    cli::RunConfig resume_cfg;
    resume_cfg.workers = hw;
    RunFlags resume_flags;
    std::string resume_path;
    auto* resume = app.add_subcommand("resume", "Continue a checkpointed run");
    add_run_flags(*resume, resume_cfg, resume_flags);
    resume->add_option("--from", resume_path, "Checkpoint to continue from")->required();

    CLI11_PARSE(app, argc, argv);

    std::optional<std::filesystem::path> failure_prefix;
    try {
        std::clog << "ptmc: kernels " << kernels::active_kernels().name << '\n';
        if (*generate) {
            apply_problem_flags(gen.generator, gen_flags);
            gen.problem_out = gen_problem_out;
            gen.ladder_out = gen_ladder_out;
            const auto r = cli::cmd_generate(gen);
            std::cout << r.size_line << '\n'
                      << "wrote " << gen_problem_out << " (" << r.sites_per_chain << " sites per chain) and "
                      << gen_ladder_out << '\n';
        } else if (*run) {
            apply_run_flags(run_cfg, run_flags);
            failure_prefix = run_cfg.out_prefix;
            const auto s = run_resume.empty() ? cli::cmd_run(run_cfg) : cli::cmd_resume(run_cfg, run_resume);
            print_run(s);
        } else if (*scaling) {
            apply_run_flags(scale_cfg, scale_flags);
            failure_prefix = scale_cfg.out_prefix;
            const auto rows = cli::cmd_scaling(scale_cfg, worker_counts);
            csv::write(std::cout, cli::scaling_table(rows));
        } else if (*throughput) {
            apply_run_flags(tp_cfg, tp_flags);
            failure_prefix = tp_cfg.out_prefix;
            std::vector<cli::ThroughputProblem> problems;
            for (const auto& p : tp_problems) problems.push_back(cli::parse_throughput_problem(p));
            const auto rows = cli::cmd_throughput(tp_cfg, problems);
            csv::write(std::cout, cli::throughput_table(rows));
        } else if (*pack_plan) {
            csv::write(std::cout, cli::cmd_pack_plan(pack));
        } else if (*resume) {
            apply_run_flags(resume_cfg, resume_flags);
            failure_prefix = resume_cfg.out_prefix;
            print_run(cli::cmd_resume(resume_cfg, resume_path));
        }
    } catch (const std::exception& e) {
        std::cerr << "ptmc: error: " << e.what() << '\n';
        write_failure_marker(failure_prefix, e.what());
        return 1;
    }
    return 0;
}
