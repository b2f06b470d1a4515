// colsim: simulate column grids, compute expected structural counts, and run
// scaling sweeps.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "colsim/bench.hpp"
#include "colsim/config.hpp"
#include "colsim/engine.hpp"
#include "colsim/netgen.hpp"
#include "colsim/topology.hpp"

namespace fs = std::filesystem;
using namespace colsim;

namespace
{

// Command-line values that override the config file, in key=value form.
struct CommonFlags
{
    std::optional<std::string> config_file;
    std::vector<std::string> sets;
    std::optional<std::string> grid;
    std::optional<std::string> boundary;
    std::optional<double> duration_ms;
    std::optional<double> dt_ms;
    std::optional<std::uint32_t> workers;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> transport;
    std::optional<std::string> peers;
    std::optional<std::string> output_dir;
    bool raster = false;
};

void add_common(CLI::App *cmd, CommonFlags &f, bool with_workers)
{
    cmd->add_option("--config", f.config_file, "key=value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", f.sets, "override one key, key=value (repeatable)");
    cmd->add_option("--grid", f.grid, "grid size WxH (grid.width, grid.height)");
    cmd->add_option("--boundary", f.boundary, "open|torus (grid.boundary)");
    cmd->add_option("--duration-ms", f.duration_ms, "simulated time (duration_ms)");
    cmd->add_option("--dt-ms", f.dt_ms, "integration step (dt_ms)");
    if (with_workers)
    {
        cmd->add_option("--workers", f.workers, "worker count (workers)")->check(CLI::Range(1u, 65535u));
    }
    cmd->add_option("--seed", f.seed, "master seed (seed)");
    cmd->add_option("--transport", f.transport, "inproc|tcp (transport)");
    cmd->add_option("--peers", f.peers, "host:port list for tcp (tcp.peers)");
    cmd->add_option("--output-dir", f.output_dir, "output directory (output.dir)");
    cmd->add_flag("--raster", f.raster, "write the spike raster (raster=on)");
    cmd->footer("Configuration keys:\n" + describe_keys());
}

Settings resolve(const CommonFlags &f)
{
    Settings s;
    if (f.config_file)
    {
        apply_config_file(s, *f.config_file);
    }
    if (f.grid)
    {
        const auto [w, h] = parse_grid(*f.grid);
        s.sim.spec.width = w;
        s.sim.spec.height = h;
    }
    if (f.boundary)
    {
        apply_setting(s, "grid.boundary", *f.boundary);
    }
    if (f.duration_ms)
    {
        s.sim.duration_ms = *f.duration_ms;
    }
    if (f.dt_ms)
    {
        s.sim.dt_ms = *f.dt_ms;
    }
    if (f.workers)
    {
        s.sim.workers = *f.workers;
    }
    if (f.seed)
    {
        s.sim.seed = *f.seed;
    }
    if (f.transport)
    {
        apply_setting(s, "transport", *f.transport);
    }
    if (f.peers)
    {
        apply_setting(s, "tcp.peers", *f.peers);
    }
    if (f.output_dir)
    {
        s.output_dir = *f.output_dir;
    }
    if (f.raster)
    {
        s.sim.record_raster = true;
    }
    for (const auto &kv : f.sets)
    {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
        {
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        }
        apply_setting(s, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return s;
}

std::string grid_tag(const GridSpec &spec)
{
    return std::to_string(spec.width) + "x" + std::to_string(spec.height);
}

void print_counts(const GridSpec &spec, const CountsReport &c)
{
    std::printf("grid %s (%s boundary)\n", grid_tag(spec).c_str(), std::string(to_string(spec.boundary)).c_str());
    std::printf("  columns                      %llu\n", static_cast<unsigned long long>(c.n_columns));
    std::printf("  neurons                      %llu\n", static_cast<unsigned long long>(c.n_neurons));
    std::printf("  recurrent synapses           %.6g (%.3fG)\n", c.expected_recurrent_synapses,
                c.expected_recurrent_synapses / 1e9);
    std::printf("  total equivalent synapses    %.6g (%.3fG)\n", c.expected_total_equivalent_synapses,
                c.expected_total_equivalent_synapses / 1e9);
    std::printf("  recurrent synapses / neuron  %.4f (local %.4f, lateral %.4f)\n", c.expected_synapses_per_neuron,
                c.expected_local_per_neuron, c.expected_lateral_per_neuron);
    std::printf("csv: grid_w,grid_h,boundary,n_columns,n_neurons,expected_recurrent_synapses,"
                "expected_total_equivalent_synapses,expected_synapses_per_neuron\n");
    std::printf("csv: %u,%u,%s,%llu,%llu,%.17g,%.17g,%.17g\n", spec.width, spec.height,
                std::string(to_string(spec.boundary)).c_str(), static_cast<unsigned long long>(c.n_columns),
                static_cast<unsigned long long>(c.n_neurons), c.expected_recurrent_synapses,
                c.expected_total_equivalent_synapses, c.expected_synapses_per_neuron);
}

void print_row(const MetricRow &r)
{
    std::fprintf(stderr, "%s: wall %.3fs, %llu events, %.3g s/event, speedup %.2f, rate %.2f Hz\n", r.run_id.c_str(),
                 r.wall_s, static_cast<unsigned long long>(r.total_events), r.time_per_event_s, r.speedup,
                 r.mean_rate_hz);
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Distributed simulator of cortical column grids"};
    app.require_subcommand(1);

    CommonFlags sim_flags;
    std::optional<WorkerId> rank;
    auto *simulate = app.add_subcommand("simulate", "run one simulation, write a CSV row and optional raster");
    add_common(simulate, sim_flags, true);
    simulate->add_option("--rank", rank, "run only this worker (multi-process tcp runs)");

    CommonFlags count_flags;
    std::optional<std::string> counts_csv;
    auto *expect = app.add_subcommand("expect-counts", "closed-form neuron and synapse counts; no simulation");
    add_common(expect, count_flags, false);
    expect->add_option("--csv", counts_csv, "also write the counts CSV to this file");

    CommonFlags bench_flags;
    std::string bench_mode;
    std::string worker_list = "1,2,4";
    std::uint32_t columns_per_worker = 16;
    std::uint32_t repeats = 3;
    auto *bench = app.add_subcommand("bench", "strong or weak scaling sweep");
    add_common(bench, bench_flags, false);
    bench->add_option("mode", bench_mode, "strong|weak")->required()->check(CLI::IsMember({"strong", "weak"}));
    bench->add_option("--workers", worker_list, "comma-separated worker counts")->capture_default_str();
    bench->add_option("--columns-per-worker", columns_per_worker, "weak scaling load per worker")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    bench->add_option("--repeats", repeats, "runs per point, fastest kept")->capture_default_str();

    std::vector<std::string> report_inputs;
    std::string report_out;
    auto *report = app.add_subcommand("report", "merge run CSV files into one");
    report->add_option("inputs", report_inputs, "CSV files to merge")->required()->check(CLI::ExistingFile);
    report->footer("Configuration keys:\n" + describe_keys());
    report->add_option("--out", report_out, "merged CSV path")->required();

    CommonFlags conn_flags;
    std::string conn_out;
    auto *connectome = app.add_subcommand("connectome", "generate the network and write the binary connectome");
    add_common(connectome, conn_flags, false);
    connectome->add_option("--out", conn_out, "output file")->required();

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*simulate)
        {
            Settings s = resolve(sim_flags);
            if (rank)
            {
                s.sim.local_workers = {*rank};
            }
            fs::create_directories(s.output_dir);
            const RunReport rep = run(s.sim);
            std::string run_id = "sim-" + grid_tag(s.sim.spec) + "-w" + std::to_string(s.sim.workers) + "-s" +
                                 std::to_string(s.sim.seed);
            if (rank)
            {
                run_id += "-rank" + std::to_string(*rank);
            }
            const MetricRow row = make_row(run_id, s.sim, rep);
            const fs::path csv = s.output_dir / (run_id + ".csv");
            emit_csv(std::span(&row, 1), csv);
            std::printf("%s\n", csv.string().c_str());
            if (s.sim.record_raster)
            {
                const fs::path raster = s.output_dir / (run_id + ".raster.tsv");
                raster_dump(rep, s.sim.dt_ms, raster);
                std::printf("%s\n", raster.string().c_str());
            }
            print_row(row);
        }
        else if (*expect)
        {
            const Settings s = resolve(count_flags);
            s.sim.spec.validate();
            const CountsReport c = expected_counts(s.sim.spec);
            print_counts(s.sim.spec, c);
            if (counts_csv)
            {
                std::FILE *f = std::fopen(counts_csv->c_str(), "w");
                if (f == nullptr)
                {
                    throw std::runtime_error("cannot open " + *counts_csv);
                }
                std::fprintf(f,
                             "grid_w,grid_h,boundary,n_columns,n_neurons,expected_recurrent_synapses,"
                             "expected_total_equivalent_synapses,expected_synapses_per_neuron\n"
                             "%u,%u,%s,%llu,%llu,%.17g,%.17g,%.17g\n",
                             s.sim.spec.width, s.sim.spec.height, std::string(to_string(s.sim.spec.boundary)).c_str(),
                             static_cast<unsigned long long>(c.n_columns), static_cast<unsigned long long>(c.n_neurons),
                             c.expected_recurrent_synapses, c.expected_total_equivalent_synapses,
                             c.expected_synapses_per_neuron);
                if (std::fclose(f) != 0)
                {
                    throw std::runtime_error("failed writing " + *counts_csv);
                }
            }
        }
        else if (*bench)
        {
            const Settings s = resolve(bench_flags);
            const auto workers = parse_worker_list(worker_list);
            fs::create_directories(s.output_dir);
            SweepOptions opts;
            opts.repeats = repeats;
            opts.on_row = print_row;
            const fs::path stem = s.output_dir / ("bench-" + bench_mode);
            if (bench_mode == "strong")
            {
                const auto rows = strong_scaling(s.sim, workers, opts);
                emit_csv(rows, stem.string() + ".csv");
                write_curve(stem.string() + "-speedup.dat", rows, [](const MetricRow &r) { return r.speedup; });
                write_curve(stem.string() + "-time_per_event.dat", rows,
                            [](const MetricRow &r) { return r.time_per_event_s; });
                write_curve(stem.string() + "-wall.dat", rows, [](const MetricRow &r) { return r.wall_s; });
            }
            else
            {
                const auto rows = weak_scaling(s.sim, columns_per_worker, workers, opts);
                emit_csv(rows, stem.string() + ".csv");
                write_curve(stem.string() + "-time_per_event_per_worker.dat", rows, time_per_event_per_worker);
                write_curve(stem.string() + "-wall.dat", rows, [](const MetricRow &r) { return r.wall_s; });
            }
            std::printf("%s.csv\n", stem.string().c_str());
        }
        else if (*report)
        {
            std::vector<fs::path> inputs(report_inputs.begin(), report_inputs.end());
            const auto rows = merge_reports(inputs, report_out);
            std::printf("%s (%zu rows)\n", report_out.c_str(), rows.size());
        }
        else if (*connectome)
        {
            const Settings s = resolve(conn_flags);
            s.sim.validate();
            std::vector<IncomingTable> tables;
            for (std::uint32_t c = 0; c < s.sim.spec.column_count(); ++c)
            {
                tables.push_back(generate_incoming(ColumnId::from_linear(c, s.sim.spec), s.sim.spec, s.sim.params,
                                                   s.sim.synapse_policy(), s.sim.seed));
            }
            write_connectome(conn_out, s.sim.spec, s.sim.seed, tables);
            std::printf("%s\n", conn_out.c_str());
        }
    }
    catch (const ConfigError &e)
    {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    }
    catch (const std::invalid_argument &e)
    {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
