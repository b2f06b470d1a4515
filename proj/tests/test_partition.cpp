#include <doctest.h>

#include <algorithm>
#include <set>

#include "colsim/partition.hpp"

using namespace colsim;

namespace
{

GridSpec grid(std::uint32_t w, std::uint32_t h, Boundary b)
{
    GridSpec s;
    s.width = w;
    s.height = h;
    s.boundary = b;
    return s;
}

// Route oracle straight from the definition: w sends to v when some column
// of v has a column of w in reach.
std::set<std::pair<WorkerId, WorkerId>> brute_force_routes(const Partition &p, const GridSpec &spec)
{
    std::set<std::pair<WorkerId, WorkerId>> routes;
    for (std::uint32_t post = 0; post < spec.column_count(); ++post)
    {
        for (const auto &r : columns_in_reach(ColumnId::from_linear(post, spec), spec))
        {
            const WorkerId from = p.assignment[r.column.linear(spec)];
            const WorkerId to = p.assignment[post];
            if (from != to)
            {
                routes.emplace(from, to);
            }
        }
    }
    return routes;
}

} // namespace

TEST_CASE("column assignment examples")
{
    const auto p = assign_columns(grid(4, 4, Boundary::torus), 3);
    CHECK(p.owned_count(0) == 6);
    CHECK(p.owned_count(1) == 5);
    CHECK(p.owned_count(2) == 5);
    CHECK(p.first_column == std::vector<std::uint32_t>{0, 6, 11, 16});
    CHECK(p.assignment[5] == 0);
    CHECK(p.assignment[6] == 1);
    CHECK(p.assignment[15] == 2);

    const auto one = assign_columns(grid(4, 4, Boundary::torus), 1);
    CHECK(std::all_of(one.assignment.begin(), one.assignment.end(), [](WorkerId w) { return w == 0; }));

    const auto each = assign_columns(grid(4, 4, Boundary::torus), 16);
    for (std::uint32_t c = 0; c < 16; ++c)
    {
        CHECK(each.assignment[c] == c);
    }

    CHECK_THROWS_AS(assign_columns(grid(4, 4, Boundary::torus), 0), std::invalid_argument);
    CHECK_THROWS_AS(assign_columns(grid(4, 4, Boundary::torus), 17), std::invalid_argument);
}

TEST_CASE("assignment is a balanced contiguous cover")
{
    for (std::uint32_t w = 1; w <= 9; ++w)
    {
        for (std::uint32_t h = 1; h <= 7; ++h)
        {
            const GridSpec spec = grid(w, h, Boundary::open);
            for (std::uint32_t workers = 1; workers <= spec.column_count(); ++workers)
            {
                const auto p = assign_columns(spec, workers);
                REQUIRE(p.assignment.size() == spec.column_count());
                CHECK(std::is_sorted(p.assignment.begin(), p.assignment.end()));
                std::uint32_t lo = spec.column_count();
                std::uint32_t hi = 0;
                for (WorkerId k = 0; k < workers; ++k)
                {
                    lo = std::min(lo, p.owned_count(k));
                    hi = std::max(hi, p.owned_count(k));
                    for (std::uint32_t c = p.begin(k); c < p.end(k); ++c)
                    {
                        CHECK(p.assignment[c] == k);
                    }
                }
                CHECK(lo >= 1);
                CHECK(hi - lo <= 1);
            }
        }
    }
}

TEST_CASE("routing table matches the brute-force oracle")
{
    for (Boundary b : {Boundary::open, Boundary::torus})
    {
        for (auto [w, h] : {std::pair{4u, 4u}, std::pair{8u, 8u}, std::pair{5u, 3u}, std::pair{1u, 1u}})
        {
            const GridSpec spec = grid(w, h, b);
            for (std::uint32_t workers : {1u, 2u, 3u, 4u, 8u})
            {
                if (workers > spec.column_count())
                {
                    continue;
                }
                const auto p = assign_columns(spec, workers);
                const auto rt = routing_table(p, spec);
                const auto oracle = brute_force_routes(p, spec);
                std::set<std::pair<WorkerId, WorkerId>> got;
                for (WorkerId from = 0; from < workers; ++from)
                {
                    CHECK(std::is_sorted(rt.send_to[from].begin(), rt.send_to[from].end()));
                    for (WorkerId to : rt.send_to[from])
                    {
                        got.emplace(from, to);
                        const auto &back = rt.receive_from[to];
                        CHECK(std::find(back.begin(), back.end(), from) != back.end());
                    }
                }
                CHECK(got == oracle);
            }
        }
    }
}

TEST_CASE("routes only join workers within stencil reach")
{
    // 24 rows of 24 columns split into 12 workers of two rows each; the
    // stencil reaches two rows, so on an open grid each worker talks to at
    // most its two neighbours on either side.
    const GridSpec spec = grid(24, 24, Boundary::open);
    const auto p = assign_columns(spec, 12);
    const auto rt = routing_table(p, spec);
    for (WorkerId w = 0; w < 12; ++w)
    {
        for (WorkerId to : rt.send_to[w])
        {
            CHECK(std::abs(int(to) - int(w)) <= 1);
        }
        CHECK(!rt.send_to[w].empty());
    }
    CHECK(routing_table(assign_columns(spec, 1), spec).send_to[0].empty());
}
