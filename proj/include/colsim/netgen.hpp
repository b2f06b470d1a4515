#pragma once

// Receiver-side generation of the recurrent connectome and of the external
// Poisson drive. Every draw comes from a counter-based stream keyed by global
// ids, so the network never depends on how columns are spread over workers.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "colsim/model.hpp"
#include "colsim/rng.hpp"
#include "colsim/topology.hpp"

namespace colsim
{

struct Synapse
{
    std::uint32_t source = 0;
    std::uint32_t target = 0;
    float weight = 0.0f;
    std::uint16_t delay_steps = 1;

    friend bool operator==(const Synapse &, const Synapse &) = default;
};

/// Global neuron id = column linear index * neurons_per_column + local index.
inline std::uint32_t global_id(std::uint32_t column_linear, std::uint32_t local, const GridSpec &spec)
{
    return column_linear * spec.neurons_per_column + local;
}

/// Incoming synapses of every neuron in one column. Entries of target i live
/// in synapses[offsets[i], offsets[i+1]), sorted by (delay_steps, source).
struct IncomingTable
{
    ColumnId column;
    std::uint32_t first_gid = 0;
    std::vector<std::uint32_t> offsets;
    std::vector<Synapse> synapses;

    std::uint32_t neuron_count() const { return static_cast<std::uint32_t>(offsets.size()) - 1; }
    std::span<const Synapse> incoming(std::uint32_t local_target) const
    {
        return std::span(synapses).subspan(offsets[local_target], offsets[local_target + 1] - offsets[local_target]);
    }
};

struct SynapsePolicy
{
    std::uint16_t delay_steps = 10;

    /// Constant delay of `delay_ms`, rounded to whole steps, at least one.
    static SynapsePolicy from_delay(double delay_ms, double dt_ms);
};

/// Draws the incoming synapses of `post_col`. For each source column in reach
/// (slot r of columns_in_reach) and each eligible source neuron, one stream
/// keyed by (source gid, r << 32 | post column) yields the target count
/// k ~ Binomial(neurons_per_column, p) and then k distinct local targets by a
/// partial Fisher-Yates shuffle. Lateral slots only use excitatory sources.
IncomingTable generate_incoming(ColumnId post_col, const GridSpec &spec, const NeuronParams &params,
                                SynapsePolicy policy, std::uint64_t seed);

/// Aggregated external drive of one neuron: Poisson with mean
/// c_ext * nu_ext * dt per step.
class ExternalDrive
{
  public:
    ExternalDrive(const GridSpec &spec, const NeuronParams &params, double dt_ms, std::uint64_t seed);

    std::uint32_t arrivals(std::uint32_t gid, std::uint64_t step) const
    {
        return arrivals_from_prefix(neuron_prefix(gid), step);
    }

    /// Per-neuron constant of the external stream tag, hoisted out of the
    /// step loop.
    std::uint64_t neuron_prefix(std::uint32_t gid) const
    {
        return stream_tag_prefix(StreamKind::external, gid, seed_);
    }

    std::uint32_t arrivals_from_prefix(std::uint64_t prefix, std::uint64_t step) const
    {
        if (lambda_ <= 0.0)
        {
            return 0;
        }
        RandomStream rng(tag_mix(prefix ^ step));
        // The first uniform decides the zero-arrival outcome exactly as the
        // full inverse-CDF draw would (small lambda only; large lambda is
        // split inside sample_poisson).
        if (lambda_ < 100.0 && RandomStream(rng).uniform() < exp_neg_lambda_)
        {
            return 0;
        }
        return sample_poisson(rng, lambda_, exp_neg_lambda_);
    }

    double lambda() const { return lambda_; }

  private:
    double lambda_;
    double exp_neg_lambda_;
    std::uint64_t seed_;
};

std::uint32_t external_arrival_count(std::uint32_t gid, std::uint64_t step, const GridSpec &spec,
                                     const NeuronParams &params, std::uint64_t seed, double dt_ms);

/// Step index reserved for the initial-membrane draw.
inline constexpr std::uint64_t initial_state_step = std::uint64_t{1} << 63;

/// Uniform in [v_rest, theta), from the external stream at initial_state_step.
double initial_membrane(std::uint32_t gid, const NeuronParams &params, std::uint64_t seed);

// Connectome dump, little-endian: "DPSC", u8 version (1), u32 width,
// u32 height, u32 neurons per column, u64 seed; then for every target gid in
// ascending order a u32 in-degree followed by (u32 source, f32 weight,
// u16 delay) records.
inline constexpr std::uint8_t connectome_version = 1;

void write_connectome(const std::filesystem::path &path, const GridSpec &spec, std::uint64_t seed,
                      std::span<const IncomingTable> tables_by_column);

struct Connectome
{
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t neurons_per_column = 0;
    std::uint64_t seed = 0;
    // Synapses grouped by ascending target.
    std::vector<Synapse> synapses;
};

Connectome read_connectome(const std::filesystem::path &path);

} // namespace colsim
