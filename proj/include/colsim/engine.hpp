#pragma once

// Lockstep, epoch-driven simulation over a set of workers. Each worker owns a
// contiguous block of columns, builds the incoming synapses of its neurons,
// and exchanges one spike batch per route at every epoch boundary. An epoch
// lasts one synaptic delay, so spikes emitted in epoch e are never due before
// epoch e + 1.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "colsim/model.hpp"
#include "colsim/netgen.hpp"
#include "colsim/partition.hpp"
#include "colsim/topology.hpp"
#include "colsim/transport.hpp"

namespace colsim
{

enum class InitialV : std::uint8_t
{
    uniform, // uniform in [v_rest, theta) per neuron, seeded
    rest,
};

std::string_view to_string(InitialV policy);
InitialV parse_initial_v(std::string_view text);

struct SimConfig
{
    GridSpec spec;
    NeuronParams params;
    double dt_ms = 0.1;
    double duration_ms = 1000.0;
    double delay_ms = 1.0;
    std::uint64_t seed = 1;
    std::uint32_t workers = 1;
    TransportKind transport = TransportKind::inproc;
    // Empty: localhost on free consecutive ports.
    std::vector<PeerAddress> tcp_peers;
    InitialV initial_v = InitialV::uniform;
    bool record_raster = false;
    Timeout timeout = std::chrono::seconds(60);
    // Run only these workers in this process (multi-process TCP runs). Empty
    // runs every worker. Reports then cover the local workers only.
    std::vector<WorkerId> local_workers;

    void validate() const;
    SynapsePolicy synapse_policy() const { return SynapsePolicy::from_delay(delay_ms, dt_ms); }
    std::uint32_t epoch_steps() const { return synapse_policy().delay_steps; }
    /// Whole epochs covering the duration.
    std::uint64_t epoch_count() const;
    std::uint64_t step_count() const { return epoch_count() * epoch_steps(); }
};

struct SpikeEvent
{
    std::uint64_t step = 0;
    std::uint32_t gid = 0;

    friend bool operator==(const SpikeEvent &, const SpikeEvent &) = default;
    friend auto operator<=>(const SpikeEvent &, const SpikeEvent &) = default;
};

/// Structural byte counts of the simulation-phase data, summed over workers.
struct MemoryAccount
{
    std::uint64_t synapse_bytes = 0;
    std::uint64_t index_bytes = 0;
    std::uint64_t ring_bytes = 0;
    std::uint64_t neuron_bytes = 0;
    std::uint64_t buffer_bytes = 0;

    std::uint64_t total() const { return synapse_bytes + index_bytes + ring_bytes + neuron_bytes + buffer_bytes; }
    MemoryAccount &operator+=(const MemoryAccount &o);
};

struct RunReport
{
    std::uint64_t recurrent_events = 0; // sum of realized fan-out over emitted spikes
    std::uint64_t external_events = 0;
    std::uint64_t total_events = 0;
    std::uint64_t delivered_events = 0; // recurrent deliveries that landed inside the run
    std::uint64_t spikes_total = 0;
    std::uint64_t realized_synapses = 0;
    std::uint64_t neurons = 0;
    std::uint64_t epochs = 0;
    std::uint64_t steps = 0;
    double simulated_ms = 0.0;
    double mean_rate_hz = 0.0;
    double wall_seconds = 0.0;  // epoch loop only
    double build_seconds = 0.0; // network generation, slowest worker
    double time_per_event = 0.0;
    MemoryAccount memory;
    std::uint64_t peak_accounted_bytes = 0;
    // Exchange rounds completed per (sender, receiver) route.
    std::uint64_t exchange_rounds = 0;
    std::uint64_t routes = 0;
    std::vector<SpikeEvent> raster; // sorted by (step, gid)
};

RunReport run(const SimConfig &config);

/// Formats a spike time in ms without trailing zeros ("0.7", "12", "3.25").
std::string format_time_ms(std::uint64_t step, double dt_ms);

/// "time_ms\tgid" lines sorted by (time, gid).
void raster_dump(const RunReport &report, double dt_ms, const std::filesystem::path &path);

} // namespace colsim
