#include <doctest.h>

#include <random>
#include <thread>

#include "colsim/bytes.hpp"
#include "colsim/transport.hpp"

using namespace colsim;

TEST_CASE("empty batch frame bytes")
{
    const Bytes frame = encode(SpikeBatch{0, 0, {}});
    const Bytes expected = {0x44, 0x50, 0x53, 0x4E, 0x01, 0x01, 0x00, 0x00, 0x00, 0x00,
                            0x00, 0x00, 0x04, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00};
    CHECK(frame == expected);
}

TEST_CASE("spike batch frame layout")
{
    const SpikeBatch batch{7, 3, {{0x01020304, 2}, {5, 9}}};
    const Bytes frame = encode(batch);
    REQUIRE(frame.size() == 16 + 4 + 2 * 6);
    CHECK(frame[6] == 3);
    CHECK(frame[8] == 7);
    CHECK(frame[12] == 16);
    CHECK(frame[16] == 2);
    const Bytes first_record = {0x04, 0x03, 0x02, 0x01, 0x02, 0x00};
    CHECK(Bytes(frame.begin() + 20, frame.begin() + 26) == first_record);
    CHECK(decode(frame) == batch);

    const Bytes term = encode_terminate(2, 99);
    CHECK(term.size() == 16);
    const auto h = decode_header(term);
    CHECK(h.type == MsgType::terminate);
    CHECK(h.source_worker == 2);
    CHECK(h.epoch == 99);
    CHECK(h.payload_len == 0);
    CHECK_THROWS_AS(decode(term), ParseError);
}

TEST_CASE("malformed frames are rejected with offsets")
{
    const Bytes good = encode(SpikeBatch{1, 1, {{10, 0}}});
    auto expect_error_at = [](Bytes b, std::size_t offset) {
        try
        {
            decode(b);
            FAIL("accepted a malformed frame");
        }
        catch (const ParseError &e)
        {
            CHECK(e.offset() == offset);
        }
    };
    Bytes bad_magic = good;
    bad_magic[0] = 'X';
    expect_error_at(bad_magic, 0);
    Bytes bad_version = good;
    bad_version[4] = 2;
    expect_error_at(bad_version, 4);
    Bytes bad_type = good;
    bad_type[5] = 9;
    expect_error_at(bad_type, 5);
    Bytes bad_count = good;
    bad_count[16] = 2;
    expect_error_at(bad_count, 16);

    Bytes truncated(good.begin(), good.end() - 1);
    CHECK_THROWS_AS(decode(truncated), ParseError);
    CHECK_THROWS_AS(decode(Bytes(good.begin(), good.begin() + 10)), ParseError);
    CHECK_THROWS_AS(decode(Bytes{}), ParseError);
}

TEST_CASE("encode and decode round trip random batches")
{
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 200; ++trial)
    {
        SpikeBatch b;
        b.epoch = static_cast<std::uint32_t>(rng());
        b.source_worker = static_cast<WorkerId>(rng());
        b.records.resize(rng() % 300);
        for (auto &r : b.records)
        {
            r.gid = static_cast<std::uint32_t>(rng());
            r.step_offset = static_cast<std::uint16_t>(rng());
        }
        const Bytes frame = encode(b);
        CHECK(frame.size() == 20 + 6 * b.records.size());
        CHECK(decode(frame) == b);
    }
}

TEST_CASE("transport names")
{
    CHECK(parse_transport("inproc") == TransportKind::inproc);
    CHECK(parse_transport("tcp") == TransportKind::tcp);
    CHECK(to_string(TransportKind::tcp) == "tcp");
    CHECK_THROWS_AS(parse_transport("mpi"), std::invalid_argument);
}

TEST_CASE("peer list parsing")
{
    const auto peers = parse_peers("127.0.0.1:5000,localhost:5001");
    REQUIRE(peers.size() == 2);
    CHECK(peers[0].host == "127.0.0.1");
    CHECK(peers[0].port == 5000);
    CHECK(peers[1].host == "localhost");
    CHECK(peers[1].port == 5001);
    CHECK_THROWS_AS(parse_peers("nohost"), std::invalid_argument);
    CHECK_THROWS_AS(parse_peers("h:99999"), std::invalid_argument);
    CHECK(localhost_peers(3, 7000)[2].port == 7002);
}

namespace
{

// Every worker sends `rounds` numbered frames to each other worker and checks
// they arrive in order.
void exchange_pattern(std::vector<std::unique_ptr<Endpoint>> &eps, std::uint32_t rounds)
{
    const auto n = static_cast<WorkerId>(eps.size());
    std::vector<std::thread> threads;
    std::vector<int> failures(n, 0);
    for (WorkerId self = 0; self < n; ++self)
    {
        threads.emplace_back([&, self] {
            auto &ep = *eps[self];
            for (std::uint32_t e = 0; e < rounds; ++e)
            {
                for (WorkerId peer = 0; peer < n; ++peer)
                {
                    if (peer != self)
                    {
                        ep.send(peer, encode(SpikeBatch{e, self, {{self * 1000u + e, 1}}}));
                    }
                }
                for (WorkerId peer = 0; peer < n; ++peer)
                {
                    if (peer != self)
                    {
                        const auto b = decode(ep.recv(peer));
                        if (b.epoch != e || b.source_worker != peer || b.records.at(0).gid != peer * 1000u + e)
                        {
                            ++failures[self];
                        }
                    }
                }
            }
        });
    }
    for (auto &t : threads)
    {
        t.join();
    }
    for (int f : failures)
    {
        CHECK(f == 0);
    }
}

} // namespace

TEST_CASE("in-process fabric delivers in order")
{
    InProcFabric fabric(3, Timeout(5000), 4);
    std::vector<std::unique_ptr<Endpoint>> eps;
    for (WorkerId w = 0; w < 3; ++w)
    {
        eps.push_back(fabric.endpoint(w));
        CHECK(eps.back()->self() == w);
    }
    exchange_pattern(eps, 50);
}

TEST_CASE("in-process receive times out and abort wakes waiters")
{
    InProcFabric fabric(2, Timeout(50));
    auto a = fabric.endpoint(0);
    CHECK_THROWS_AS(a->recv(1), TransportError);

    InProcFabric slow(2, Timeout(60000));
    auto b = slow.endpoint(0);
    std::thread t([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        slow.abort();
    });
    CHECK_THROWS_AS(b->recv(1), TransportError);
    t.join();
}

TEST_CASE("tcp mesh delivers in order")
{
    const std::uint32_t n = 3;
    const auto peers = localhost_peers(n, find_free_port_range(n));
    std::vector<std::unique_ptr<Endpoint>> eps(n);
    std::vector<std::thread> threads;
    for (WorkerId w = 0; w < n; ++w)
    {
        threads.emplace_back([&, w] {
            std::vector<WorkerId> neighbours;
            for (WorkerId v = 0; v < n; ++v)
            {
                if (v != w)
                {
                    neighbours.push_back(v);
                }
            }
            eps[w] = connect_tcp(w, peers, neighbours, Timeout(10000));
        });
    }
    for (auto &t : threads)
    {
        t.join();
    }
    exchange_pattern(eps, 50);
}

TEST_CASE("tcp connect fails after the timeout when a peer never appears")
{
    const auto peers = localhost_peers(2, find_free_port_range(2));
    CHECK_THROWS_AS(connect_tcp(0, peers, {1}, Timeout(300)), TransportError);
}
