#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "colsim/netgen.hpp"

using namespace colsim;

namespace
{

GridSpec small_torus(std::uint32_t w, std::uint32_t h, std::uint32_t npc)
{
    GridSpec s;
    s.width = w;
    s.height = h;
    s.neurons_per_column = npc;
    s.boundary = Boundary::torus;
    return s;
}

std::vector<IncomingTable> all_tables(const GridSpec &spec, std::uint64_t seed)
{
    std::vector<IncomingTable> out;
    for (std::uint32_t c = 0; c < spec.column_count(); ++c)
    {
        out.push_back(generate_incoming(ColumnId::from_linear(c, spec), spec, NeuronParams{}, SynapsePolicy{10}, seed));
    }
    return out;
}

} // namespace

TEST_CASE("splitmix64 reference vectors")
{
    RandomStream a(0);
    CHECK(a.next() == 0xe220a8397b1dcdafull);
    CHECK(a.next() == 0x6e789e6aa1b965f4ull);
    CHECK(a.next() == 0x06c45d188009454full);
    CHECK(a.next() == 0xf88bb8a8724c81ecull);

    RandomStream b(1234567);
    CHECK(b.next() == 0x599ed017fb08fc85ull);
    CHECK(b.next() == 0x2c73f08458540fa5ull);
    CHECK(b.next() == 0x883ebce5a3f27c77ull);
    CHECK(b.next() == 0x3fbef740e9177b3full);
}

TEST_CASE("stream tags are deterministic and separate kinds and keys")
{
    CHECK(stream_tag(StreamKind::synapse, 5, 7, 1) == stream_tag(StreamKind::synapse, 5, 7, 1));
    CHECK(stream_tag(StreamKind::synapse, 5, 7, 1) != stream_tag(StreamKind::external, 5, 7, 1));
    CHECK(stream_tag(StreamKind::synapse, 5, 7, 1) != stream_tag(StreamKind::synapse, 7, 5, 1));
    CHECK(stream_tag(StreamKind::synapse, 5, 7, 1) != stream_tag(StreamKind::synapse, 5, 7, 2));
    // The documented mixing chain.
    const std::uint64_t h0 = RandomStream(9).next();
    const std::uint64_t h1 = RandomStream(h0 ^ 2).next();
    const std::uint64_t h2 = RandomStream(h1 ^ 11).next();
    CHECK(stream_tag(StreamKind::external, 11, 13, 9) == RandomStream(h2 ^ 13).next());
}

TEST_CASE("bounded draws stay in range and cover it")
{
    RandomStream rng(77);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 70000; ++i)
    {
        const auto v = rng.below(7);
        REQUIRE(v < 7);
        ++hits[v];
    }
    for (int h : hits)
    {
        CHECK(std::abs(h - 10000) < 5 * std::sqrt(10000.0));
    }
    RandomStream u(5);
    for (int i = 0; i < 1000; ++i)
    {
        const double x = u.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
}

TEST_CASE("binomial sampler matches mean and variance")
{
    struct Case
    {
        std::uint32_t n;
        double p;
    };
    for (const Case c : {Case{1240, 0.8}, Case{1240, 0.0303}, Case{20, 0.5}, Case{100000, 0.8}, Case{50, 0.99}})
    {
        RandomStream rng(c.n * 31 + 7);
        const int draws = 20000;
        double sum = 0.0;
        double sum2 = 0.0;
        for (int i = 0; i < draws; ++i)
        {
            const double k = sample_binomial(rng, c.n, c.p);
            REQUIRE(k <= c.n);
            sum += k;
            sum2 += k * k;
        }
        const double mean = sum / draws;
        const double var = sum2 / draws - mean * mean;
        const double expected_var = c.n * c.p * (1 - c.p);
        CHECK(std::abs(mean - c.n * c.p) < 5 * std::sqrt(expected_var / draws));
        CHECK(var == doctest::Approx(expected_var).epsilon(0.05));
    }
    RandomStream rng(1);
    CHECK(sample_binomial(rng, 100, 0.0) == 0);
    CHECK(sample_binomial(rng, 100, 1.0) == 100);
    CHECK(sample_binomial(rng, 0, 0.5) == 0);
}

TEST_CASE("poisson sampler matches its mean")
{
    for (double lambda : {0.162, 3.0, 50.0, 2000.0})
    {
        RandomStream rng(static_cast<std::uint64_t>(lambda * 1000));
        const int draws = 100000;
        double sum = 0.0;
        for (int i = 0; i < draws; ++i)
        {
            sum += sample_poisson(rng, lambda, std::exp(-lambda));
        }
        CHECK(std::abs(sum / draws - lambda) < 5 * std::sqrt(lambda / draws));
    }
}

TEST_CASE("external drive has the configured per-step mean")
{
    const GridSpec spec;
    const NeuronParams params;
    const ExternalDrive drive(spec, params, 0.1, 3);
    CHECK(drive.lambda() == doctest::Approx(540 * 3.0 * 0.1e-3));
    double sum = 0.0;
    const std::uint64_t steps = 1'000'000;
    for (std::uint64_t s = 0; s < steps; ++s)
    {
        sum += drive.arrivals(17, s);
    }
    CHECK(sum / steps == doctest::Approx(0.162).epsilon(0.01));
    CHECK(drive.arrivals(17, 42) == external_arrival_count(17, 42, spec, params, 3, 0.1));

    NeuronParams silent = params;
    silent.nu_ext = 0.0;
    const ExternalDrive none(spec, silent, 0.1, 3);
    for (std::uint64_t s = 0; s < 1000; ++s)
    {
        CHECK(none.arrivals(5, s) == 0);
    }
}

TEST_CASE("initial membrane lies in [v_rest, theta) and is deterministic")
{
    const NeuronParams p;
    for (std::uint32_t gid = 0; gid < 1000; ++gid)
    {
        const double v = initial_membrane(gid, p, 8);
        CHECK(v >= p.v_rest);
        CHECK(v < p.theta);
        CHECK(v == initial_membrane(gid, p, 8));
    }
    CHECK(initial_membrane(1, p, 8) != initial_membrane(1, p, 9));
}

TEST_CASE("delay policy rounds to whole steps")
{
    CHECK(SynapsePolicy::from_delay(1.0, 0.1).delay_steps == 10);
    CHECK(SynapsePolicy::from_delay(0.01, 0.1).delay_steps == 1);
    CHECK(SynapsePolicy::from_delay(2.5, 0.5).delay_steps == 5);
}

TEST_CASE("single column in-degree is binomial around p_local * N")
{
    const GridSpec spec;
    const auto t = generate_incoming({0, 0}, spec, NeuronParams{}, SynapsePolicy{10}, 1);
    REQUIRE(t.neuron_count() == 1240);
    const double n = 1240.0 * 1240.0;
    const double mean = 0.8 * n;
    const double sd = std::sqrt(n * 0.8 * 0.2);
    CHECK(std::abs(static_cast<double>(t.synapses.size()) - mean) <= 3 * sd);

    for (std::uint32_t i = 0; i < t.neuron_count(); i += 37)
    {
        const auto in = t.incoming(i);
        std::set<std::uint32_t> sources;
        for (const auto &s : in)
        {
            CHECK(s.target == t.first_gid + i);
            CHECK(s.source < 1240);
            CHECK(s.delay_steps == 10);
            sources.insert(s.source);
        }
        // At most one synapse per ordered pair; sorted by source.
        CHECK(sources.size() == in.size());
        CHECK(std::is_sorted(in.begin(), in.end(), [](const Synapse &a, const Synapse &b) { return a.source < b.source; }));
    }
}

TEST_CASE("full source column: p_local = 1 connects every source to every target")
{
    GridSpec spec;
    spec.p_local = 1.0;
    spec.neurons_per_column = 200;
    const auto t = generate_incoming({0, 0}, spec, NeuronParams{}, SynapsePolicy{10}, 4);
    for (std::uint32_t i = 0; i < t.neuron_count(); ++i)
    {
        const auto in = t.incoming(i);
        REQUIRE(in.size() == 200);
        for (std::uint32_t s = 0; s < 200; ++s)
        {
            CHECK(in[s].source == s);
            CHECK(in[s].weight == (s < 160 ? 0.2f : -1.5f));
        }
    }
}

TEST_CASE("generation is deterministic in the seed")
{
    const GridSpec spec = small_torus(3, 3, 60);
    const auto a = generate_incoming({1, 2}, spec, NeuronParams{}, SynapsePolicy{10}, 11);
    const auto b = generate_incoming({1, 2}, spec, NeuronParams{}, SynapsePolicy{10}, 11);
    const auto c = generate_incoming({1, 2}, spec, NeuronParams{}, SynapsePolicy{10}, 12);
    CHECK(a.offsets == b.offsets);
    CHECK(a.synapses == b.synapses);
    CHECK(a.synapses != c.synapses);
}

TEST_CASE("lateral synapses are excitatory and come from stencil columns")
{
    GridSpec spec;
    spec.width = 7;
    spec.height = 6;
    spec.neurons_per_column = 100;
    spec.lateral_amplitude = 0.3; // more laterals so every offset shows up
    const auto tables = all_tables(spec, 21);
    const auto st = stencil(spec);
    std::set<std::pair<int, int>> offsets_seen;
    for (const auto &t : tables)
    {
        for (const auto &s : t.synapses)
        {
            const std::uint32_t src_col = s.source / 100;
            const ColumnId src = ColumnId::from_linear(src_col, spec);
            if (src == t.column)
            {
                continue;
            }
            CHECK(spec.is_excitatory_local(s.source % 100));
            CHECK(s.weight == 0.2f);
            const int dx = static_cast<int>(t.column.x) - static_cast<int>(src.x);
            const int dy = static_cast<int>(t.column.y) - static_cast<int>(src.y);
            const bool in_stencil =
                std::any_of(st.begin(), st.end(), [&](const StencilOffset &o) { return o.dx == dx && o.dy == dy; });
            CHECK(in_stencil);
            offsets_seen.emplace(dx, dy);
        }
    }
    CHECK(offsets_seen.size() == st.size());
}

TEST_CASE("realized count on a small torus is within 3 sigma of expectation")
{
    const GridSpec spec = small_torus(4, 4, 300);
    const auto tables = all_tables(spec, 2);
    std::uint64_t total = 0;
    for (const auto &t : tables)
    {
        total += t.synapses.size();
    }
    // Sum of independent Bernoulli pairs: variance is sum p(1 - p).
    const double n = 300.0;
    const double n_exc = spec.excitatory_per_column();
    double mean = 0.0;
    double var = 0.0;
    const auto add = [&](double pairs, double p) {
        mean += pairs * p;
        var += pairs * p * (1 - p);
    };
    for (std::uint32_t c = 0; c < spec.column_count(); ++c)
    {
        add(n * n, spec.p_local);
        for (const auto &o : stencil(spec))
        {
            add(n_exc * n, o.p);
        }
    }
    CHECK(mean == doctest::Approx(expected_counts(spec).expected_recurrent_synapses));
    CHECK(std::abs(static_cast<double>(total) - mean) <= 3 * std::sqrt(var));
}

TEST_CASE("connectome dump round trip")
{
    const GridSpec spec = small_torus(2, 2, 40);
    const auto tables = all_tables(spec, 6);
    const auto path = std::filesystem::temp_directory_path() / "colsim_test_connectome.bin";
    write_connectome(path, spec, 6, tables);
    const auto c = read_connectome(path);
    CHECK(c.width == 2);
    CHECK(c.height == 2);
    CHECK(c.neurons_per_column == 40);
    CHECK(c.seed == 6);
    std::vector<Synapse> expected;
    for (const auto &t : tables)
    {
        expected.insert(expected.end(), t.synapses.begin(), t.synapses.end());
    }
    CHECK(c.synapses == expected);
    std::filesystem::remove(path);
}
