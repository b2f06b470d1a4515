#include "colsim/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace colsim
{

MemoryFigures memory_accounting(const RunReport &report)
{
    MemoryFigures m;
    m.bytes_accounted = report.memory.total();
    if (report.realized_synapses > 0)
    {
        m.bytes_per_synapse = static_cast<double>(m.bytes_accounted) / static_cast<double>(report.realized_synapses);
    }
    return m;
}

MetricRow make_row(std::string run_id, const SimConfig &config, const RunReport &report)
{
    MetricRow row;
    row.run_id = std::move(run_id);
    row.grid_w = config.spec.width;
    row.grid_h = config.spec.height;
    row.workers = config.workers;
    row.sim_ms = report.simulated_ms;
    row.wall_s = report.wall_seconds;
    row.recurrent_events = report.recurrent_events;
    row.external_events = report.external_events;
    row.total_events = report.total_events;
    row.time_per_event_s = report.time_per_event;
    const MemoryFigures mem = memory_accounting(report);
    row.bytes_accounted = mem.bytes_accounted;
    row.bytes_per_synapse = mem.bytes_per_synapse;
    row.spikes_total = report.spikes_total;
    row.mean_rate_hz = report.mean_rate_hz;
    return row;
}

namespace
{

std::string grid_tag(const SimConfig &c)
{
    return std::to_string(c.spec.width) + "x" + std::to_string(c.spec.height);
}

// Fastest of `repeats` identical runs. Event counts must agree between
// repeats; a mismatch means the engine lost determinism.
MetricRow best_of(const std::string &prefix, const SimConfig &config, std::uint32_t repeats)
{
    const std::uint32_t n = std::max(1u, repeats);
    std::optional<MetricRow> best;
    for (std::uint32_t i = 0; i < n; ++i)
    {
        const RunReport rep = run(config);
        MetricRow row = make_row(prefix + "-best" + std::to_string(n), config, rep);
        if (best && (best->total_events != row.total_events || best->spikes_total != row.spikes_total))
        {
            throw std::logic_error("repeated runs of one configuration disagree on event counts");
        }
        if (!best || row.wall_s < best->wall_s)
        {
            best = std::move(row);
        }
    }
    return *best;
}

std::pair<std::uint32_t, std::uint32_t> squarest(std::uint32_t n)
{
    auto small = static_cast<std::uint32_t>(std::sqrt(static_cast<double>(n)));
    while (small > 1 && n % small != 0)
    {
        --small;
    }
    small = std::max(1u, small);
    return {n / small, small};
}

void check_workers(std::span<const std::uint32_t> workers)
{
    if (workers.empty())
    {
        throw std::invalid_argument("worker list is empty");
    }
    for (std::uint32_t w : workers)
    {
        if (w == 0)
        {
            throw std::invalid_argument("worker counts must be positive");
        }
    }
}

} // namespace

std::vector<MetricRow> strong_scaling(const SimConfig &base, std::span<const std::uint32_t> workers,
                                      const SweepOptions &options)
{
    check_workers(workers);
    std::vector<MetricRow> rows;
    std::optional<double> baseline;
    for (std::uint32_t w : workers)
    {
        SimConfig c = base;
        c.workers = w;
        MetricRow row = best_of("strong-" + grid_tag(c) + "-w" + std::to_string(w), c, options.repeats);
        if (w == 1 && !baseline)
        {
            baseline = row.wall_s;
        }
        rows.push_back(std::move(row));
    }
    if (!baseline)
    {
        SimConfig c = base;
        c.workers = 1;
        baseline = best_of("baseline", c, options.repeats).wall_s;
    }
    for (auto &row : rows)
    {
        row.speedup = row.workers == 1 ? 1.0 : *baseline / row.wall_s;
        if (options.on_row)
        {
            options.on_row(row);
        }
    }
    return rows;
}

std::pair<std::uint32_t, std::uint32_t> weak_grid(std::uint32_t columns_per_worker, std::uint32_t workers)
{
    if (columns_per_worker == 0 || workers == 0)
    {
        throw std::invalid_argument("columns per worker and worker count must be positive");
    }
    const auto [tile_w, tile_h] = squarest(columns_per_worker);
    const auto [rep_x, rep_y] = squarest(workers);
    const std::uint64_t w = std::uint64_t{tile_w} * rep_x;
    const std::uint64_t h = std::uint64_t{tile_h} * rep_y;
    if (w * h != std::uint64_t{columns_per_worker} * workers || w > 0xFFFF || h > 0xFFFF)
    {
        throw std::invalid_argument("cannot shape a grid of " + std::to_string(columns_per_worker) + " x " +
                                    std::to_string(workers) + " columns");
    }
    return {static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h)};
}

std::vector<MetricRow> weak_scaling(const SimConfig &base, std::uint32_t columns_per_worker,
                                    std::span<const std::uint32_t> workers, const SweepOptions &options)
{
    check_workers(workers);
    std::vector<MetricRow> rows;
    std::optional<double> baseline;
    for (std::uint32_t w : workers)
    {
        SimConfig c = base;
        c.workers = w;
        std::tie(c.spec.width, c.spec.height) = weak_grid(columns_per_worker, w);
        MetricRow row = best_of("weak-" + grid_tag(c) + "-w" + std::to_string(w), c, options.repeats);
        if (w == 1 && !baseline)
        {
            baseline = row.wall_s;
        }
        rows.push_back(std::move(row));
    }
    if (!baseline)
    {
        SimConfig c = base;
        c.workers = 1;
        std::tie(c.spec.width, c.spec.height) = weak_grid(columns_per_worker, 1);
        baseline = best_of("baseline", c, options.repeats).wall_s;
    }
    for (auto &row : rows)
    {
        row.speedup = row.workers == 1 ? 1.0 : *baseline / row.wall_s;
        if (options.on_row)
        {
            options.on_row(row);
        }
    }
    return rows;
}

namespace
{

std::string fmt_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string &line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ','))
    {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',')
    {
        out.emplace_back();
    }
    return out;
}

template <typename T>
T parse_number(const std::string &text, const std::string &field)
{
    try
    {
        std::size_t used = 0;
        T v{};
        if constexpr (std::is_same_v<T, double>)
        {
            v = std::stod(text, &used);
        }
        else
        {
            v = static_cast<T>(std::stoull(text, &used));
        }
        if (used != text.size())
        {
            throw std::invalid_argument(text);
        }
        return v;
    }
    catch (const std::exception &)
    {
        throw std::runtime_error("bad value '" + text + "' in CSV column " + field);
    }
}

} // namespace

void emit_csv(std::span<const MetricRow> rows, const std::filesystem::path &path)
{
    std::ofstream os(path, std::ios::trunc);
    if (!os)
    {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    os << csv_header << '\n';
    for (const MetricRow &r : rows)
    {
        if (r.run_id.find(',') != std::string::npos)
        {
            throw std::invalid_argument("run_id must not contain commas");
        }
        os << r.run_id << ',' << r.grid_w << ',' << r.grid_h << ',' << r.workers << ',' << fmt_double(r.sim_ms) << ','
           << fmt_double(r.wall_s) << ',' << r.recurrent_events << ',' << r.external_events << ',' << r.total_events
           << ',' << fmt_double(r.time_per_event_s) << ',' << fmt_double(r.speedup) << ',' << r.bytes_accounted << ','
           << (r.bytes_per_synapse ? fmt_double(*r.bytes_per_synapse) : std::string{}) << ',' << r.spikes_total << ','
           << fmt_double(r.mean_rate_hz) << '\n';
    }
    if (!os.flush())
    {
        throw std::runtime_error("failed writing " + path.string());
    }
}

std::vector<MetricRow> parse_csv(const std::filesystem::path &path)
{
    std::ifstream is(path);
    if (!is)
    {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(is, line) || line != csv_header)
    {
        throw std::runtime_error(path.string() + ": missing or unexpected CSV header");
    }
    std::vector<MetricRow> rows;
    while (std::getline(is, line))
    {
        if (line.empty())
        {
            continue;
        }
        const auto f = split_csv(line);
        if (f.size() != 15)
        {
            throw std::runtime_error(path.string() + ": expected 15 fields, got " + std::to_string(f.size()));
        }
        MetricRow r;
        r.run_id = f[0];
        r.grid_w = parse_number<std::uint32_t>(f[1], "grid_w");
        r.grid_h = parse_number<std::uint32_t>(f[2], "grid_h");
        r.workers = parse_number<std::uint32_t>(f[3], "workers");
        r.sim_ms = parse_number<double>(f[4], "sim_ms");
        r.wall_s = parse_number<double>(f[5], "wall_s");
        r.recurrent_events = parse_number<std::uint64_t>(f[6], "recurrent_events");
        r.external_events = parse_number<std::uint64_t>(f[7], "external_events");
        r.total_events = parse_number<std::uint64_t>(f[8], "total_events");
        r.time_per_event_s = parse_number<double>(f[9], "time_per_event_s");
        r.speedup = parse_number<double>(f[10], "speedup");
        r.bytes_accounted = parse_number<std::uint64_t>(f[11], "bytes_accounted");
        if (!f[12].empty())
        {
            r.bytes_per_synapse = parse_number<double>(f[12], "bytes_per_synapse");
        }
        r.spikes_total = parse_number<std::uint64_t>(f[13], "spikes_total");
        r.mean_rate_hz = parse_number<double>(f[14], "mean_rate_hz");
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<MetricRow> merge_reports(std::span<const std::filesystem::path> inputs,
                                     const std::filesystem::path &output)
{
    std::vector<MetricRow> all;
    for (const auto &p : inputs)
    {
        auto rows = parse_csv(p);
        all.insert(all.end(), rows.begin(), rows.end());
    }
    emit_csv(all, output);
    return all;
}

void write_curve(const std::filesystem::path &path, std::span<const MetricRow> rows,
                 const std::function<double(const MetricRow &)> &metric)
{
    std::ofstream os(path, std::ios::trunc);
    if (!os)
    {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    os << "# workers value\n";
    for (const MetricRow &r : rows)
    {
        os << r.workers << ' ' << fmt_double(metric(r)) << '\n';
    }
    if (!os.flush())
    {
        throw std::runtime_error("failed writing " + path.string());
    }
}

} // namespace colsim
