#pragma once

// Column-grid geometry, connection probabilities and closed-form structural
// counts. Everything here is pure.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace colsim
{

enum class Boundary : std::uint8_t
{
    open,
    torus,
};

std::string_view to_string(Boundary b);
Boundary parse_boundary(std::string_view text);

struct GridSpec
{
    std::uint32_t width = 1;
    std::uint32_t height = 1;
    std::uint32_t neurons_per_column = 1240;
    double excitatory_fraction = 0.8;
    double p_local = 0.8;
    double lateral_amplitude = 0.05;
    // Grid step in micrometers. Distances enter the lateral kernel in units
    // of the grid step, so this value never changes a probability.
    double grid_step_um = 100.0;
    double cutoff = 1.0 / 1000.0;
    std::uint32_t c_ext = 540;
    Boundary boundary = Boundary::open;

    std::uint32_t column_count() const { return width * height; }
    std::uint64_t neuron_count() const
    {
        return std::uint64_t{column_count()} * neurons_per_column;
    }
    std::uint32_t excitatory_per_column() const;
    std::uint32_t inhibitory_per_column() const
    {
        return neurons_per_column - excitatory_per_column();
    }
    // Local indices [0, excitatory_per_column()) are excitatory.
    bool is_excitatory_local(std::uint32_t local_index) const
    {
        return local_index < excitatory_per_column();
    }

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct ColumnId
{
    std::uint32_t x = 0;
    std::uint32_t y = 0;

    std::uint32_t linear(const GridSpec &spec) const { return y * spec.width + x; }
    static ColumnId from_linear(std::uint32_t index, const GridSpec &spec)
    {
        return {index % spec.width, index / spec.width};
    }
    friend bool operator==(const ColumnId &, const ColumnId &) = default;
};

struct StencilOffset
{
    int dx = 0;
    int dy = 0;
    double p = 0.0;
};

struct ColumnReach
{
    ColumnId column;
    double p = 0.0;
    bool lateral = false;
};

struct CountsReport
{
    std::uint64_t n_columns = 0;
    std::uint64_t n_neurons = 0;
    double expected_recurrent_synapses = 0.0;
    double expected_total_equivalent_synapses = 0.0;
    double expected_synapses_per_neuron = 0.0;
    // Per-neuron split of the recurrent in-degree, averaged over the grid.
    double expected_local_per_neuron = 0.0;
    double expected_lateral_per_neuron = 0.0;
};

inline constexpr int stencil_radius = 3;

/// A * exp(-d^2 / 2) with d in grid steps, or 0 below the cutoff.
double lateral_probability(double d_squared, const GridSpec &spec);

/// Active lateral offsets in the 7x7 box, sorted by (dy, dx).
std::vector<StencilOffset> stencil(const GridSpec &spec);

/// Source columns that project onto `col`, the column itself first with
/// p_local, then the stencil in order. Open boundaries drop out-of-grid
/// offsets; a torus wraps them. On small tori several offsets may wrap onto
/// the same column; each offset is still listed separately.
std::vector<ColumnReach> columns_in_reach(ColumnId col, const GridSpec &spec);

/// Expected lateral in-degree of one neuron in `col`.
double expected_lateral_in_degree(ColumnId col, const GridSpec &spec);

CountsReport expected_counts(const GridSpec &spec);

} // namespace colsim
