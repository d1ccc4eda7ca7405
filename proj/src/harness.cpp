#include "ptmc/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "ptmc/persist.hpp"

namespace ptmc::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

template <typename T>
std::string str(T v) {
    return std::to_string(v);
}

const RegionPartition* partition_of(const Problem& p) { return p.partition ? &*p.partition : nullptr; }

Problem problem_for(const RunConfig& config) {
    if (config.problem_file) return load_problem(*config.problem_file);
    return generate_problem(config.generator, config.seed);
}

void write_reports(const RunSummary& summary, const std::filesystem::path& prefix) {
    auto emit = [&](const char* suffix, const csv::Table& table) {
        std::ostringstream text;
        csv::write(text, table);
        auto path = prefix;
        path += suffix;
        csv::write_file_atomic(path, text.str());
    };
    emit(".phases.csv", phases_table(summary));
    emit(".runs.csv", runs_table(summary));
    emit(".chains.csv", chains_table(summary));
    emit(".pairs.csv", pairs_table(summary));
}

Repetition execute(Ensemble& ensemble, const Problem& problem, const RunConfig& config,
                   std::uint64_t total_sweeps, const std::optional<std::filesystem::path>& checkpoint,
                   Clock::time_point start) {
    Repetition rep;
    WorkerPool workers(config.workers, config.throttle.priority);
    std::optional<persist::CheckpointSink> sink;
    if (checkpoint) {
        sink.emplace(*checkpoint, std::chrono::duration<double>(config.checkpoint_interval_seconds), problem.model,
                     persist::Schedule{total_sweeps});
    }
    RunHooks hooks;
    hooks.on_phase = [&](const Ensemble& e, const PhaseRecord& record) {
        rep.phases.push_back(record);
        if (sink) (*sink)(e, record);
    };
    RunOptions options;
    options.total_sweeps = total_sweeps;
    options.throttle = config.throttle;
    rep.report = run(ensemble, problem.model, partition_of(problem), workers, options, hooks);
    if (sink) sink->save_now(ensemble);
    rep.state_hash = fnv1a64(encode_ensemble(ensemble));
    rep.total_seconds = seconds_since(start);
    return rep;
}

void summarize(RunSummary& summary) {
    std::vector<double> pt;
    std::vector<double> total;
    for (const Repetition& r : summary.repetitions) {
        pt.push_back(r.report.pt_seconds);
        total.push_back(r.total_seconds);
    }
    summary.pt_seconds = mean_std(pt);
    summary.total_seconds = mean_std(total);
}

}  // namespace

// ---------------------------------------------------------------------------

Problem generate_problem(const GeneratorParams& params, std::uint32_t seed) {
    RngStream rng(seed);
    const SliceSpec slice = random_slice(params.qubits, params.slice, rng);
    LayeredProblem layered = generate_layered(slice, params.copies, params.inter_slice_strength);
    return Problem{std::move(layered.model), std::move(layered.partition)};
}

Problem load_problem(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open problem file " + path.string());
    ProblemFile file = read_problem(in);
    return Problem{std::move(file.model), std::move(file.partition)};
}

void validate(const RunConfig& c) {
    if (c.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    if (c.workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (c.sweeps_per_swap < 1) throw std::invalid_argument("sweeps per swap must be >= 1");
    if (!c.ladder_file && c.chains < 2 && c.total_sweeps > 0) {
        throw std::invalid_argument("a run with swaps needs at least 2 chains");
    }
    if (!(c.throttle.duty_cycle > 0.0 && c.throttle.duty_cycle <= 1.0)) {
        throw std::invalid_argument("duty cycle must be in (0, 1]");
    }
    if (c.checkpoint_interval_seconds < 0.0) throw std::invalid_argument("checkpoint interval must be >= 0");
}

std::vector<double> ladder_for(const RunConfig& config) {
    if (config.ladder_file) {
        std::ifstream in(*config.ladder_file);
        if (!in) throw std::runtime_error("cannot open ladder file " + config.ladder_file->string());
        auto ladder = read_ladder(in);
        if (ladder.size() < 2 && config.total_sweeps > 0) {
            throw std::invalid_argument("a run with swaps needs at least 2 chains");
        }
        return ladder;
    }
    return geometric_ladder(config.t_min, config.t_max, config.chains);
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) return out;
    double sum = 0.0;
    for (const double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double sq = 0.0;
        for (const double v : values) sq += (v - out.mean) * (v - out.mean);
        out.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return out;
}

RunSummary cmd_run(const RunConfig& config) {
    validate(config);
    const Problem problem = problem_for(config);
    const auto ladder = ladder_for(config);
    EnsembleSpec spec{ladder, config.seed, config.mode, config.sweeps_per_swap};

    RunSummary summary;
    summary.num_sites = problem.model.num_sites();
    for (std::size_t r = 0; r < config.repetitions; ++r) {
        const auto start = Clock::now();
        Ensemble ensemble = make_ensemble(problem.model, partition_of(problem), spec);
        summary.repetitions.push_back(execute(ensemble, problem, config, config.total_sweeps, config.checkpoint, start));
        if (r + 1 == config.repetitions) summary.final_ensemble = std::move(ensemble);
    }
    summarize(summary);
    if (config.out_prefix) write_reports(summary, *config.out_prefix);
    return summary;
}

RunSummary cmd_resume(const RunConfig& config, const std::filesystem::path& checkpoint) {
    validate(config);
    const Problem problem = problem_for(config);
    const auto start = Clock::now();
    persist::Checkpoint cp = persist::load(checkpoint, problem.model);

    RunSummary summary;
    summary.num_sites = problem.model.num_sites();
    const auto target = config.checkpoint ? config.checkpoint : std::optional<std::filesystem::path>(checkpoint);
    summary.repetitions.push_back(execute(cp.ensemble, problem, config, cp.schedule.total_sweeps, target, start));
    summary.final_ensemble = std::move(cp.ensemble);
    summarize(summary);
    if (config.out_prefix) write_reports(summary, *config.out_prefix);
    return summary;
}

csv::Table phases_table(const RunSummary& summary) {
    const std::size_t n = summary.final_ensemble.chains.size();
    csv::Table t;
    t.header = {"kind", "repetition", "phase", "sweep", "pt_seconds", "total_seconds"};
    for (std::size_t c = 0; c < n; ++c) t.header.push_back("energy_" + str(c));
    for (std::size_t c = 0; c < n; ++c) t.header.push_back("flip_rate_" + str(c));
    for (std::size_t p = 0; p + 1 < n; ++p) t.header.push_back("swap_rate_" + str(p));
    const std::size_t width = t.header.size();
    for (std::size_t r = 0; r < summary.repetitions.size(); ++r) {
        const Repetition& rep = summary.repetitions[r];
        for (const PhaseRecord& rec : rep.phases) {
            std::vector<std::string> row = {"phase", str(r + 1), str(rec.phase), str(rec.sweep_counter), "", ""};
            for (const double e : rec.energies) row.push_back(csv::format(e));
            for (const double f : rec.flip_rates) row.push_back(csv::format(f));
            for (const double s : rec.swap_rates) row.push_back(csv::format(s));
            row.resize(width);
            t.rows.push_back(std::move(row));
        }
        std::vector<std::string> row = {"summary",
                                        str(r + 1),
                                        str(rep.report.phases),
                                        str(rep.report.scheduled_sweeps),
                                        csv::format(rep.report.pt_seconds),
                                        csv::format(rep.total_seconds)};
        row.resize(width);
        t.rows.push_back(std::move(row));
    }
    return t;
}

csv::Table runs_table(const RunSummary& summary) {
    csv::Table t;
    t.header = {"kind", "repetition", "pt_seconds", "total_seconds", "phases", "sweeps", "state_hash"};
    for (std::size_t r = 0; r < summary.repetitions.size(); ++r) {
        const Repetition& rep = summary.repetitions[r];
        t.rows.push_back({"run", str(r + 1), csv::format(rep.report.pt_seconds), csv::format(rep.total_seconds),
                          str(rep.report.phases), str(rep.report.scheduled_sweeps), hex64(rep.state_hash)});
    }
    t.rows.push_back({"mean", "", csv::format(summary.pt_seconds.mean), csv::format(summary.total_seconds.mean), "",
                      "", ""});
    t.rows.push_back({"stddev", "", csv::format(summary.pt_seconds.stddev),
                      csv::format(summary.total_seconds.stddev), "", "", ""});
    return t;
}

csv::Table chains_table(const RunSummary& summary) {
    csv::Table t;
    t.header = {"slot",         "temperature",     "beta",      "energy", "energy_mean",
                "energy_variance", "flip_rate", "sweeps"};
    const auto& chains = summary.final_ensemble.chains;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        const Chain& ch = chains[c];
        t.rows.push_back({str(c), csv::format(ch.temperature()), csv::format(ch.beta), csv::format(ch.energy),
                          csv::format(ch.stats.energy_mean), csv::format(ch.stats.energy_variance()),
                          csv::format(ch.stats.flip_rate()), str(ch.stats.sweeps)});
    }
    return t;
}

csv::Table pairs_table(const RunSummary& summary) {
    csv::Table t;
    t.header = {"pair", "lower", "upper", "attempted", "accepted", "rate"};
    const auto& stats = summary.final_ensemble.swap_stats;
    for (std::size_t p = 0; p < stats.size(); ++p) {
        t.rows.push_back({str(p), str(p), str(p + 1), str(stats[p].attempted), str(stats[p].accepted),
                          csv::format(stats[p].rate())});
    }
    return t;
}

// ---------------------------------------------------------------------------

std::size_t total_variables(std::size_t qubits, std::size_t copies, std::size_t chains) {
    return qubits * copies * chains;
}

std::string with_thousands(std::uint64_t value) {
    std::string digits = std::to_string(value);
    for (std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(digits.size()) - 3; pos > 0; pos -= 3) {
        digits.insert(static_cast<std::size_t>(pos), ",");
    }
    return digits;
}

GenerateResult cmd_generate(const GenerateConfig& config) {
    if (config.chains < 1) throw std::invalid_argument("chains must be >= 1");
    const Problem problem = generate_problem(config.generator, config.seed);
    const auto ladder = geometric_ladder(config.t_min, config.t_max, config.chains);
    if (config.problem_out) {
        std::ostringstream text;
        write_problem(text, problem.model, partition_of(problem));
        csv::write_file_atomic(*config.problem_out, text.str());
    }
    if (config.ladder_out) {
        std::ostringstream text;
        write_ladder(text, ladder);
        csv::write_file_atomic(*config.ladder_out, text.str());
    }
    GenerateResult r;
    r.qubits = config.generator.qubits;
    r.copies = config.generator.copies;
    r.chains = config.chains;
    r.sites_per_chain = problem.model.num_sites();
    r.total_variables = total_variables(r.qubits, r.copies, r.chains);
    r.size_line = "qubits " + str(r.qubits) + "  chains " + str(r.chains) + "  total variables " +
                  with_thousands(r.total_variables);
    return r;
}

// ---------------------------------------------------------------------------

std::vector<SpeedupRow> speedup_rows(const std::vector<std::pair<std::size_t, double>>& timings) {
    const double* base = nullptr;
    for (const auto& [w, s] : timings) {
        if (w == 1) {
            if (base != nullptr) throw std::invalid_argument("duplicate timing for 1 worker");
            base = &s;
        }
    }
    if (base == nullptr) throw std::invalid_argument("scaling needs a timing for 1 worker");
    std::vector<SpeedupRow> rows;
    for (const auto& [w, s] : timings) {
        if (!(s > 0.0)) throw std::invalid_argument("timings must be positive");
        rows.push_back({w, s, *base / s, static_cast<double>(w)});
    }
    return rows;
}

std::vector<ScalingRow> cmd_scaling(const RunConfig& config, const std::vector<std::size_t>& worker_counts) {
    if (worker_counts.empty()) throw std::invalid_argument("worker count list is empty");
    std::vector<ScalingRow> rows;
    std::vector<std::pair<std::size_t, double>> timings;
    for (const std::size_t w : worker_counts) {
        RunConfig c = config;
        c.workers = w;
        c.out_prefix.reset();
        c.checkpoint.reset();
        const RunSummary s = cmd_run(c);
        rows.push_back({w, s.pt_seconds, s.total_seconds, 0.0, 0.0, s.repetitions.back().state_hash});
        timings.emplace_back(w, s.pt_seconds.mean);
    }
    const auto speedups = speedup_rows(timings);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].speedup = speedups[i].speedup;
        rows[i].linear = speedups[i].linear;
    }
    if (config.out_prefix) {
        std::ostringstream text;
        csv::write(text, scaling_table(rows));
        auto path = *config.out_prefix;
        path += ".scaling.csv";
        csv::write_file_atomic(path, text.str());
    }
    return rows;
}

csv::Table scaling_table(const std::vector<ScalingRow>& rows) {
    csv::Table t;
    t.header = {"workers", "pt_seconds",    "pt_stddev", "total_seconds",
                "total_stddev", "speedup", "linear",    "state_hash"};
    for (const ScalingRow& r : rows) {
        t.rows.push_back({str(r.workers), csv::format(r.pt_seconds.mean), csv::format(r.pt_seconds.stddev),
                          csv::format(r.total_seconds.mean), csv::format(r.total_seconds.stddev),
                          csv::format(r.speedup), csv::format(r.linear), hex64(r.state_hash)});
    }
    return t;
}

// ---------------------------------------------------------------------------

ThroughputProblem parse_throughput_problem(const std::string& text) {
    ThroughputProblem p{};
    std::size_t* fields[] = {&p.qubits, &p.copies, &p.chains};
    std::size_t start = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const auto end = k < 2 ? text.find(':', start) : text.size();
        if (end == std::string::npos) throw std::invalid_argument("expected qubits:copies:chains, got '" + text + "'");
        const auto res = std::from_chars(text.data() + start, text.data() + end, *fields[k]);
        if (res.ec != std::errc{} || res.ptr != text.data() + end) {
            throw std::invalid_argument("expected qubits:copies:chains, got '" + text + "'");
        }
        start = end + 1;
    }
    return p;
}

double throughput(std::uint64_t variables, double pt_seconds) {
    if (!(pt_seconds > 0.0)) throw std::invalid_argument("parallel tempering time must be positive");
    return static_cast<double>(variables) / pt_seconds;
}

std::vector<ThroughputRow> cmd_throughput(const RunConfig& config, const std::vector<ThroughputProblem>& problems) {
    if (problems.empty()) throw std::invalid_argument("problem list is empty");
    if (config.problem_file) throw std::invalid_argument("throughput generates its problems; drop --problem");
    std::vector<ThroughputRow> rows;
    for (const ThroughputProblem& p : problems) {
        RunConfig c = config;
        c.generator.qubits = p.qubits;
        c.generator.copies = p.copies;
        c.chains = p.chains;
        c.ladder_file.reset();
        c.out_prefix.reset();
        c.checkpoint.reset();
        const RunSummary s = cmd_run(c);
        const auto vars = total_variables(p.qubits, p.copies, p.chains);
        rows.push_back({p, vars, s.pt_seconds.mean, s.total_seconds.mean, throughput(vars, s.pt_seconds.mean)});
    }
    if (config.out_prefix) {
        std::ostringstream text;
        csv::write(text, throughput_table(rows));
        auto path = *config.out_prefix;
        path += ".throughput.csv";
        csv::write_file_atomic(path, text.str());
    }
    return rows;
}

csv::Table throughput_table(const std::vector<ThroughputRow>& rows) {
    csv::Table t;
    t.header = {"qubits", "copies", "chains", "variables", "pt_seconds", "total_seconds", "variables_per_second"};
    for (const ThroughputRow& r : rows) {
        t.rows.push_back({str(r.problem.qubits), str(r.problem.copies), str(r.problem.chains), str(r.variables),
                          csv::format(r.pt_seconds), csv::format(r.total_seconds),
                          csv::format(r.variables_per_second)});
    }
    return t;
}

// ---------------------------------------------------------------------------

csv::Table cmd_pack_plan(const PackPlanConfig& config) {
    csv::Table t;
    t.header = {"registers_available", "registers_per_chain", "chains",          "processors",
                "block_size",          "packed_chains",       "num_blocks",      "parallel_chains",
                "register_fallbacks"};
    for (const std::size_t budget : config.register_budgets) {
        PackingRequest req;
        req.num_chains = config.chains;
        req.processor_count = config.processors;
        req.block_size = config.block_size;
        req.max_threads_per_block = config.max_threads_per_block;
        req.registers_available = budget;
        req.registers_per_chain = config.registers_per_chain;
        const PackingPlan plan = plan_packing(req);
        t.rows.push_back({str(budget), str(config.registers_per_chain), str(config.chains), str(config.processors),
                          str(plan.block_size), str(plan.packed_chains), str(plan.num_blocks),
                          str(plan.parallel_chains), str(plan.register_fallbacks)});
    }
    return t;
}

}  // namespace ptmc::cli
