#pragma once

#include <cstdint>
#include <vector>

#include "colsim/topology.hpp"

namespace colsim
{

using WorkerId = std::uint16_t;

/// Contiguous row-major blocks of columns; the first (columns % workers)
/// workers get one extra column.
struct Partition
{
    std::uint32_t worker_count = 0;
    std::vector<WorkerId> assignment; // column linear index -> worker
    std::vector<std::uint32_t> first_column; // size worker_count + 1

    std::uint32_t begin(WorkerId w) const { return first_column[w]; }
    std::uint32_t end(WorkerId w) const { return first_column[w + 1]; }
    std::uint32_t owned_count(WorkerId w) const { return end(w) - begin(w); }
};

/// Throws std::invalid_argument unless 1 <= workers <= columns.
Partition assign_columns(const GridSpec &spec, std::uint32_t workers);

/// send_to[w]: ascending peers that need w's spikes; receive_from is its
/// transpose.
struct RoutingTable
{
    std::vector<std::vector<WorkerId>> send_to;
    std::vector<std::vector<WorkerId>> receive_from;
};

RoutingTable routing_table(const Partition &partition, const GridSpec &spec);

} // namespace colsim
