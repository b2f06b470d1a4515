#pragma once

// Scaling harness: strong and weak sweeps, structural memory accounting, and
// the CSV schema shared by every run report.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "colsim/engine.hpp"

namespace colsim
{

struct MetricRow
{
    std::string run_id;
    std::uint32_t grid_w = 0;
    std::uint32_t grid_h = 0;
    std::uint32_t workers = 0;
    double sim_ms = 0.0;
    double wall_s = 0.0;
    std::uint64_t recurrent_events = 0;
    std::uint64_t external_events = 0;
    std::uint64_t total_events = 0;
    double time_per_event_s = 0.0;
    double speedup = 1.0;
    std::uint64_t bytes_accounted = 0;
    std::optional<double> bytes_per_synapse;
    std::uint64_t spikes_total = 0;
    double mean_rate_hz = 0.0;

    friend bool operator==(const MetricRow &, const MetricRow &) = default;
};

inline constexpr const char *csv_header = "run_id,grid_w,grid_h,workers,sim_ms,wall_s,recurrent_events,"
                                          "external_events,total_events,time_per_event_s,speedup,"
                                          "bytes_accounted,bytes_per_synapse,spikes_total,mean_rate_hz";

struct MemoryFigures
{
    std::uint64_t bytes_accounted = 0;
    // Absent when the network has no recurrent synapses.
    std::optional<double> bytes_per_synapse;
};

MemoryFigures memory_accounting(const RunReport &report);

/// Packed size of one generated synapse record: source, target, weight, delay.
inline constexpr std::size_t synapse_record_bytes = 4 + 4 + 4 + 2;

/// Row for a single run; speedup defaults to 1.
MetricRow make_row(std::string run_id, const SimConfig &config, const RunReport &report);

struct SweepOptions
{
    // Each point is run this many times and the fastest wall time is kept.
    std::uint32_t repeats = 3;
    // Invoked after every run, e.g. for progress output.
    std::function<void(const MetricRow &)> on_row;
};

/// Fixed problem, one row per worker count. Speedup is relative to a
/// one-worker run of the same problem, run separately if 1 is not listed.
std::vector<MetricRow> strong_scaling(const SimConfig &base, std::span<const std::uint32_t> workers,
                                      const SweepOptions &options = {});

/// Grid for `workers` x `columns_per_worker` columns: the base tile is the
/// most square factorization of columns_per_worker, replicated along x and y
/// by the most square factorization of workers (x gets the larger factor).
/// 16 columns/worker gives 4x4, 8x4, 8x8, 16x8 for 1, 2, 4, 8 workers.
std::pair<std::uint32_t, std::uint32_t> weak_grid(std::uint32_t columns_per_worker, std::uint32_t workers);

/// Load per worker fixed, problem grows with workers. Speedup is
/// wall(1 worker) / wall(N) against the sweep's one-worker point.
std::vector<MetricRow> weak_scaling(const SimConfig &base, std::uint32_t columns_per_worker,
                                    std::span<const std::uint32_t> workers, const SweepOptions &options = {});

/// Elapsed time per synaptic event per worker, the weak-scaling metric.
inline double time_per_event_per_worker(const MetricRow &row)
{
    return row.time_per_event_s * row.workers;
}

void emit_csv(std::span<const MetricRow> rows, const std::filesystem::path &path);
std::vector<MetricRow> parse_csv(const std::filesystem::path &path);

/// Concatenates the rows of `inputs` in argument order into `output`.
std::vector<MetricRow> merge_reports(std::span<const std::filesystem::path> inputs,
                                     const std::filesystem::path &output);

/// Two-column "x y" data file, x = workers.
void write_curve(const std::filesystem::path &path, std::span<const MetricRow> rows,
                 const std::function<double(const MetricRow &)> &metric);

} // namespace colsim
