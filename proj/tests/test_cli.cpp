#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "colsim/bench.hpp"
#include "colsim/config.hpp"

using namespace colsim;
namespace fs = std::filesystem;

namespace
{

struct Result
{
    int status = -1;
    std::string out;
};

Result run_cli(const std::string &args)
{
    const std::string cmd = std::string(COLSIM_CLI_PATH) + " " + args + " 2>&1";
    Result r;
    FILE *p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::array<char, 4096> buf{};
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), p))
    {
        r.out.append(buf.data(), n);
    }
    const int raw = pclose(p);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

std::string slurp(const fs::path &p)
{
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string &name)
{
    const fs::path d = fs::temp_directory_path() / ("colsim_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

const std::string small = "--set neurons_per_column=60 --set nu_ext_hz=5 ";

} // namespace

TEST_CASE("config keys have defaults, round trip, and reject unknowns")
{
    Settings s;
    for (const auto &k : config_keys())
    {
        const std::string value = k.get(s);
        CHECK_NOTHROW(apply_setting(s, k.name, value));
        CHECK(k.get(s) == value);
    }
    CHECK_THROWS_AS(apply_setting(s, "grid.depth", "3"), ConfigError);
    CHECK_THROWS_AS(apply_setting(s, "dt_ms", "fast"), ConfigError);
    CHECK_THROWS_AS(apply_setting(s, "workers", "0"), ConfigError);

    apply_config_text(s, "# comment\n\ngrid.width = 5\nmodel.j_inh=-2\nraster=on\ntcp.peers=a:1,b:2\n");
    CHECK(s.sim.spec.width == 5);
    CHECK(s.sim.params.j_inh == -2.0);
    CHECK(s.sim.record_raster);
    CHECK(s.sim.tcp_peers.size() == 2);
    CHECK_THROWS_AS(apply_config_text(s, "no equals sign\n"), ConfigError);

    CHECK(parse_grid("24x24") == std::pair{24u, 24u});
    CHECK_THROWS_AS(parse_grid("24"), ConfigError);
    CHECK(parse_worker_list("1,2,4") == std::vector<std::uint32_t>{1, 2, 4});
    CHECK_THROWS_AS(parse_worker_list("1,,2"), ConfigError);
    CHECK_THROWS_AS(parse_worker_list("0"), ConfigError);
}

TEST_CASE("help for every subcommand lists all keys with defaults")
{
    const Settings defaults;
    for (const char *sub : {"simulate", "expect-counts", "bench", "report", "connectome"})
    {
        const Result r = run_cli(std::string(sub) + " --help");
        CHECK(r.status == 0);
        for (const auto &k : config_keys())
        {
            const std::string line = std::string(k.name) + " (default: " + k.get(defaults) + ")";
            INFO(sub, " ", line);
            CHECK(r.out.find(line) != std::string::npos);
        }
    }
}

TEST_CASE("simulate writes a CSV row and raster, deterministically")
{
    const fs::path d = scratch("sim");
    const std::string args = "simulate --grid 2x2 --boundary torus --duration-ms 30 --workers 2 --seed 7 --raster " +
                             small + "--output-dir " + d.string();
    const Result a = run_cli(args);
    REQUIRE(a.status == 0);
    const fs::path csv = d / "sim-2x2-w2-s7.csv";
    const fs::path raster = d / "sim-2x2-w2-s7.raster.tsv";
    const auto rows = parse_csv(csv);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].workers == 2);
    CHECK(rows[0].grid_w == 2);
    CHECK(rows[0].sim_ms == doctest::Approx(30.0));
    const std::string first = slurp(raster);
    CHECK(!first.empty());

    REQUIRE(run_cli(args).status == 0);
    CHECK(slurp(raster) == first);

    // Same network on one worker.
    REQUIRE(run_cli("simulate --grid 2x2 --boundary torus --duration-ms 30 --workers 1 --seed 7 --raster " + small +
                    "--output-dir " + d.string())
                .status == 0);
    CHECK(slurp(d / "sim-2x2-w1-s7.raster.tsv") == first);
    fs::remove_all(d);
}

TEST_CASE("config file values are overridden by flags")
{
    const fs::path d = scratch("cfg");
    std::ofstream(d / "run.cfg") << "grid.width=3\ngrid.height=1\nduration_ms=5\nneurons_per_column=40\nseed=3\n";
    const Result r = run_cli("simulate --config " + (d / "run.cfg").string() + " --seed 4 --output-dir " + d.string());
    REQUIRE(r.status == 0);
    CHECK(fs::exists(d / "sim-3x1-w1-s4.csv"));
    CHECK(run_cli("simulate --config " + (d / "run.cfg").string() + " --set bogus=1 --output-dir " + d.string())
              .status != 0);
    fs::remove_all(d);
}

TEST_CASE("usage errors exit nonzero")
{
    CHECK(run_cli("simulate --workers 0").status != 0);
    CHECK(run_cli("simulate --grid 2x2 --workers 5 --duration-ms 1").status != 0);
    CHECK(run_cli("bench strong --workers 1,x").status != 0);
    CHECK(run_cli("bench strong --workers 0,2").status != 0);
    CHECK(run_cli("expect-counts --grid 0x4").status != 0);
    CHECK(run_cli("frobnicate").status != 0);
}

TEST_CASE("expect-counts reports closed-form counts")
{
    const Result r = run_cli("expect-counts --grid 1x1");
    REQUIRE(r.status == 0);
    CHECK(r.out.find("csv: 1,1,open,1,1240,1230080,1899680,992") != std::string::npos);

    const fs::path d = scratch("counts");
    const Result t = run_cli("expect-counts --grid 24x24 --boundary torus --csv " + (d / "c.csv").string());
    REQUIRE(t.status == 0);
    CHECK(t.out.find("714240") != std::string::npos);
    const std::string csv = slurp(d / "c.csv");
    CHECK(csv.rfind("grid_w,grid_h,boundary,n_columns,n_neurons,", 0) == 0);
    CHECK(csv.find("\n24,24,torus,576,714240,") != std::string::npos);
    fs::remove_all(d);
}

TEST_CASE("bench writes CSV and curve files")
{
    const fs::path d = scratch("bench");
    const Result s = run_cli("bench strong --grid 2x2 --workers 1,2,4 --repeats 1 --duration-ms 10 " + small +
                             "--output-dir " + d.string());
    REQUIRE(s.status == 0);
    const auto strong = parse_csv(d / "bench-strong.csv");
    REQUIRE(strong.size() == 3);
    CHECK(fs::exists(d / "bench-strong-speedup.dat"));

    const Result w = run_cli("bench weak --columns-per-worker 2 --workers 1,2 --repeats 1 --duration-ms 10 " + small +
                             "--output-dir " + d.string());
    REQUIRE(w.status == 0);
    const auto weak = parse_csv(d / "bench-weak.csv");
    REQUIRE(weak.size() == 2);
    CHECK(weak[0].grid_w * weak[0].grid_h == 2);
    CHECK(weak[1].grid_w * weak[1].grid_h == 4);

    const Result m = run_cli("report " + (d / "bench-strong.csv").string() + " " + (d / "bench-weak.csv").string() +
                             " --out " + (d / "all.csv").string());
    REQUIRE(m.status == 0);
    CHECK(parse_csv(d / "all.csv").size() == 5);
    fs::remove_all(d);
}

TEST_CASE("connectome subcommand writes a readable dump")
{
    const fs::path d = scratch("conn");
    const Result r = run_cli("connectome --grid 2x1 --set neurons_per_column=30 --out " + (d / "c.bin").string());
    REQUIRE(r.status == 0);
    const auto c = read_connectome(d / "c.bin");
    CHECK(c.width == 2);
    CHECK(c.neurons_per_column == 30);
    CHECK(!c.synapses.empty());
    fs::remove_all(d);
}
