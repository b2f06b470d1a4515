#include "colsim/netgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "colsim/bytes.hpp"

namespace colsim
{

SynapsePolicy SynapsePolicy::from_delay(double delay_ms, double dt_ms)
{
    if (!(dt_ms > 0.0) || !(delay_ms > 0.0))
    {
        throw std::invalid_argument("delay and dt must be positive");
    }
    const long steps = std::lround(delay_ms / dt_ms);
    if (steps > 0xFFFF)
    {
        throw std::invalid_argument("delay exceeds 65535 steps");
    }
    return {static_cast<std::uint16_t>(std::max(1L, steps))};
}

namespace
{

// Identity permutation that is restored after each partial shuffle, so a
// draw of k targets costs O(k) rather than O(neurons_per_column).
class TargetSampler
{
  public:
    explicit TargetSampler(std::uint32_t n)
        : perm_(n)
    {
        std::iota(perm_.begin(), perm_.end(), 0u);
    }

    template <typename Emit>
    void draw(RandomStream &rng, std::uint32_t k, Emit &&emit)
    {
        const auto n = static_cast<std::uint32_t>(perm_.size());
        touched_.clear();
        for (std::uint32_t i = 0; i < k; ++i)
        {
            const std::uint32_t j = i + rng.below(n - i);
            std::swap(perm_[i], perm_[j]);
            touched_.push_back(j);
            emit(perm_[i]);
        }
        for (std::uint32_t i = 0; i < k; ++i)
        {
            perm_[i] = i;
        }
        for (std::uint32_t j : touched_)
        {
            perm_[j] = j;
        }
    }

  private:
    std::vector<std::uint32_t> perm_;
    std::vector<std::uint32_t> touched_;
};

} // namespace

IncomingTable generate_incoming(ColumnId post_col, const GridSpec &spec, const NeuronParams &params,
                                SynapsePolicy policy, std::uint64_t seed)
{
    const std::uint32_t npc = spec.neurons_per_column;
    const std::uint32_t post_linear = post_col.linear(spec);
    const std::uint32_t n_exc = spec.excitatory_per_column();

    IncomingTable table;
    table.column = post_col;
    table.first_gid = global_id(post_linear, 0, spec);

    // (source, local target) pairs in generation order.
    std::vector<std::uint32_t> sources;
    std::vector<std::uint32_t> targets;
    const auto reach = columns_in_reach(post_col, spec);
    const double expected = expected_lateral_in_degree(post_col, spec) * npc + spec.p_local * npc * npc;
    sources.reserve(static_cast<std::size_t>(expected * 1.05) + 64);
    targets.reserve(sources.capacity());

    TargetSampler sampler(npc);
    for (std::size_t slot = 0; slot < reach.size(); ++slot)
    {
        const auto &r = reach[slot];
        const std::uint32_t eligible = r.lateral ? n_exc : npc;
        const std::uint32_t src_linear = r.column.linear(spec);
        const std::uint64_t b = (std::uint64_t{slot} << 32) | post_linear;
        for (std::uint32_t s = 0; s < eligible; ++s)
        {
            const std::uint32_t gid = global_id(src_linear, s, spec);
            RandomStream rng(stream_tag(StreamKind::synapse, gid, b, seed));
            const std::uint32_t k = sample_binomial(rng, npc, r.p);
            sampler.draw(rng, k, [&](std::uint32_t t) {
                sources.push_back(gid);
                targets.push_back(t);
            });
        }
    }

    // Counting sort by target, then (delay, source) within each target.
    table.offsets.assign(npc + 1, 0);
    for (std::uint32_t t : targets)
    {
        ++table.offsets[t + 1];
    }
    std::partial_sum(table.offsets.begin(), table.offsets.end(), table.offsets.begin());
    table.synapses.resize(sources.size());
    std::vector<std::uint32_t> cursor(table.offsets.begin(), table.offsets.end() - 1);
    const auto w_exc = static_cast<float>(params.j_exc);
    const auto w_inh = static_cast<float>(params.j_inh);
    for (std::size_t i = 0; i < sources.size(); ++i)
    {
        const std::uint32_t src_local = sources[i] % npc;
        Synapse &syn = table.synapses[cursor[targets[i]]++];
        syn.source = sources[i];
        syn.target = table.first_gid + targets[i];
        syn.weight = spec.is_excitatory_local(src_local) ? w_exc : w_inh;
        syn.delay_steps = policy.delay_steps;
    }
    for (std::uint32_t t = 0; t < npc; ++t)
    {
        std::sort(table.synapses.begin() + table.offsets[t], table.synapses.begin() + table.offsets[t + 1],
                  [](const Synapse &a, const Synapse &b) {
                      return a.delay_steps != b.delay_steps ? a.delay_steps < b.delay_steps : a.source < b.source;
                  });
    }
    return table;
}

ExternalDrive::ExternalDrive(const GridSpec &spec, const NeuronParams &params, double dt_ms, std::uint64_t seed)
    : lambda_(spec.c_ext * params.nu_ext * dt_ms * 1e-3)
    , exp_neg_lambda_(std::exp(-lambda_))
    , seed_(seed)
{
    if (!(dt_ms > 0.0))
    {
        throw std::invalid_argument("dt must be positive");
    }
}

std::uint32_t external_arrival_count(std::uint32_t gid, std::uint64_t step, const GridSpec &spec,
                                     const NeuronParams &params, std::uint64_t seed, double dt_ms)
{
    return ExternalDrive(spec, params, dt_ms, seed).arrivals(gid, step);
}

double initial_membrane(std::uint32_t gid, const NeuronParams &params, std::uint64_t seed)
{
    RandomStream rng(stream_tag(StreamKind::external, gid, initial_state_step, seed));
    return params.v_rest + rng.uniform() * (params.theta - params.v_rest);
}

namespace
{
constexpr std::uint8_t connectome_magic[4] = {'D', 'P', 'S', 'C'};
}

void write_connectome(const std::filesystem::path &path, const GridSpec &spec, std::uint64_t seed,
                      std::span<const IncomingTable> tables_by_column)
{
    if (tables_by_column.size() != spec.column_count())
    {
        throw std::invalid_argument("connectome dump needs one table per column");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
    {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    std::vector<std::uint8_t> buf;
    ByteWriter w(buf);
    w.raw(connectome_magic);
    w.u8(connectome_version);
    w.u32(spec.width);
    w.u32(spec.height);
    w.u32(spec.neurons_per_column);
    w.u64(seed);
    for (const auto &table : tables_by_column)
    {
        for (std::uint32_t t = 0; t < table.neuron_count(); ++t)
        {
            const auto in = table.incoming(t);
            w.u32(static_cast<std::uint32_t>(in.size()));
            for (const auto &syn : in)
            {
                w.u32(syn.source);
                w.f32(syn.weight);
                w.u16(syn.delay_steps);
            }
        }
        os.write(reinterpret_cast<const char *>(buf.data()), static_cast<std::streamsize>(buf.size()));
        buf.clear();
    }
    if (!os.flush())
    {
        throw std::runtime_error("failed writing " + path.string());
    }
}

Connectome read_connectome(const std::filesystem::path &path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
    {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    ByteReader r(bytes);
    const auto magic = r.raw(4);
    if (!std::equal(magic.begin(), magic.end(), std::begin(connectome_magic)))
    {
        throw ParseError("bad connectome magic", 0);
    }
    if (const auto version = r.u8(); version != connectome_version)
    {
        throw ParseError("unsupported connectome version " + std::to_string(version), 4);
    }
    Connectome c;
    c.width = r.u32();
    c.height = r.u32();
    c.neurons_per_column = r.u32();
    c.seed = r.u64();
    const std::uint64_t n = std::uint64_t{c.width} * c.height * c.neurons_per_column;
    for (std::uint64_t t = 0; t < n; ++t)
    {
        const std::uint32_t degree = r.u32();
        for (std::uint32_t i = 0; i < degree; ++i)
        {
            Synapse syn;
            syn.source = r.u32();
            syn.weight = r.f32();
            syn.delay_steps = r.u16();
            syn.target = static_cast<std::uint32_t>(t);
            c.synapses.push_back(syn);
        }
    }
    if (r.remaining() != 0)
    {
        throw ParseError("trailing bytes after connectome", r.position());
    }
    return c;
}

} // namespace colsim
