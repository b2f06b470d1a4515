#include "colsim/topology.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace colsim
{

std::string_view to_string(Boundary b)
{
    return b == Boundary::torus ? "torus" : "open";
}

Boundary parse_boundary(std::string_view text)
{
    if (text == "open")
    {
        return Boundary::open;
    }
    if (text == "torus")
    {
        return Boundary::torus;
    }
    throw std::invalid_argument("unknown boundary '" + std::string(text) + "' (expected open|torus)");
}

std::uint32_t GridSpec::excitatory_per_column() const
{
    return static_cast<std::uint32_t>(std::lround(neurons_per_column * excitatory_fraction));
}

void GridSpec::validate() const
{
    auto fail = [](const std::string &what) { throw std::invalid_argument("grid spec: " + what); };
    if (width < 1 || height < 1)
    {
        fail("grid dimensions must be at least 1x1");
    }
    if (neurons_per_column < 1)
    {
        fail("neurons_per_column must be at least 1");
    }
    if (!(excitatory_fraction > 0.0 && excitatory_fraction < 1.0))
    {
        fail("excitatory_fraction must lie in (0,1)");
    }
    if (!(p_local >= 0.0 && p_local <= 1.0))
    {
        fail("p_local must lie in [0,1]");
    }
    if (!(lateral_amplitude >= 0.0 && lateral_amplitude <= 1.0))
    {
        fail("lateral amplitude must lie in [0,1]");
    }
    if (!(cutoff >= 0.0 && cutoff <= 1.0))
    {
        fail("cutoff must lie in [0,1]");
    }
    if (!(grid_step_um > 0.0))
    {
        fail("grid step must be positive");
    }
    // Neuron ids are 32-bit on the wire.
    if (neuron_count() > 0xFFFFFFFFull)
    {
        fail("network exceeds 2^32 neurons");
    }
}

double lateral_probability(double d_squared, const GridSpec &spec)
{
    const double p = spec.lateral_amplitude * std::exp(-0.5 * d_squared);
    return p >= spec.cutoff ? p : 0.0;
}

std::vector<StencilOffset> stencil(const GridSpec &spec)
{
    std::vector<StencilOffset> out;
    for (int dy = -stencil_radius; dy <= stencil_radius; ++dy)
    {
        for (int dx = -stencil_radius; dx <= stencil_radius; ++dx)
        {
            if (dx == 0 && dy == 0)
            {
                continue;
            }
            const double p = lateral_probability(dx * dx + dy * dy, spec);
            if (p > 0.0)
            {
                out.push_back({dx, dy, p});
            }
        }
    }
    return out;
}

namespace
{

bool wrap(int v, std::uint32_t extent, Boundary boundary, std::uint32_t &out)
{
    const int n = static_cast<int>(extent);
    if (boundary == Boundary::torus)
    {
        out = static_cast<std::uint32_t>(((v % n) + n) % n);
        return true;
    }
    if (v < 0 || v >= n)
    {
        return false;
    }
    out = static_cast<std::uint32_t>(v);
    return true;
}

} // namespace

std::vector<ColumnReach> columns_in_reach(ColumnId col, const GridSpec &spec)
{
    std::vector<ColumnReach> out;
    out.push_back({col, spec.p_local, false});
    for (const auto &off : stencil(spec))
    {
        ColumnId src;
        if (wrap(static_cast<int>(col.x) + off.dx, spec.width, spec.boundary, src.x) &&
            wrap(static_cast<int>(col.y) + off.dy, spec.height, spec.boundary, src.y))
        {
            out.push_back({src, off.p, true});
        }
    }
    return out;
}

double expected_lateral_in_degree(ColumnId col, const GridSpec &spec)
{
    double sum = 0.0;
    for (const auto &r : columns_in_reach(col, spec))
    {
        if (r.lateral)
        {
            sum += r.p;
        }
    }
    return sum * spec.excitatory_per_column();
}

CountsReport expected_counts(const GridSpec &spec)
{
    CountsReport rep;
    rep.n_columns = spec.column_count();
    rep.n_neurons = spec.neuron_count();

    const double local = spec.p_local * spec.neurons_per_column;
    double lateral_sum = 0.0;
    for (std::uint32_t i = 0; i < spec.column_count(); ++i)
    {
        lateral_sum += expected_lateral_in_degree(ColumnId::from_linear(i, spec), spec);
    }
    const double npc = spec.neurons_per_column;
    rep.expected_recurrent_synapses = npc * (local * rep.n_columns + lateral_sum);
    rep.expected_total_equivalent_synapses =
        rep.expected_recurrent_synapses + static_cast<double>(rep.n_neurons) * spec.c_ext;
    rep.expected_local_per_neuron = local;
    rep.expected_lateral_per_neuron = lateral_sum / rep.n_columns;
    rep.expected_synapses_per_neuron = rep.expected_recurrent_synapses / static_cast<double>(rep.n_neurons);
    return rep;
}

} // namespace colsim
