#include "colsim/partition.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace colsim
{

Partition assign_columns(const GridSpec &spec, std::uint32_t workers)
{
    const std::uint32_t columns = spec.column_count();
    if (workers < 1 || workers > columns)
    {
        throw std::invalid_argument("worker count " + std::to_string(workers) + " must lie in [1, " +
                                    std::to_string(columns) + "]");
    }
    if (workers > 0xFFFF)
    {
        throw std::invalid_argument("at most 65535 workers are addressable");
    }
    Partition p;
    p.worker_count = workers;
    p.assignment.resize(columns);
    p.first_column.resize(workers + 1);
    const std::uint32_t base = columns / workers;
    const std::uint32_t extra = columns % workers;
    std::uint32_t next = 0;
    for (std::uint32_t w = 0; w < workers; ++w)
    {
        p.first_column[w] = next;
        const std::uint32_t n = base + (w < extra ? 1 : 0);
        std::fill_n(p.assignment.begin() + next, n, static_cast<WorkerId>(w));
        next += n;
    }
    p.first_column[workers] = next;
    return p;
}

RoutingTable routing_table(const Partition &partition, const GridSpec &spec)
{
    const std::uint32_t n = partition.worker_count;
    std::vector<std::vector<bool>> link(n, std::vector<bool>(n, false));
    for (std::uint32_t col = 0; col < spec.column_count(); ++col)
    {
        const WorkerId receiver = partition.assignment[col];
        for (const auto &r : columns_in_reach(ColumnId::from_linear(col, spec), spec))
        {
            const WorkerId sender = partition.assignment[r.column.linear(spec)];
            if (sender != receiver)
            {
                link[sender][receiver] = true;
            }
        }
    }
    RoutingTable rt;
    rt.send_to.resize(n);
    rt.receive_from.resize(n);
    for (std::uint32_t s = 0; s < n; ++s)
    {
        for (std::uint32_t r = 0; r < n; ++r)
        {
            if (link[s][r])
            {
                rt.send_to[s].push_back(static_cast<WorkerId>(r));
                rt.receive_from[r].push_back(static_cast<WorkerId>(s));
            }
        }
    }
    return rt;
}

} // namespace colsim
