#include "colsim/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace colsim
{

namespace
{

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
    {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view value, std::string_view expected)
{
    throw ConfigError("invalid value '" + std::string(value) + "' (expected " + std::string(expected) + ")");
}

double to_double(std::string_view v)
{
    const std::string s(v);
    std::size_t used = 0;
    double out = 0.0;
    try
    {
        out = std::stod(s, &used);
    }
    catch (const std::exception &)
    {
        bad_value(v, "a number");
    }
    if (used != s.size() || !std::isfinite(out))
    {
        bad_value(v, "a number");
    }
    return out;
}

template <typename T>
T to_unsigned(std::string_view v)
{
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
    {
        bad_value(v, "a non-negative integer");
    }
    return out;
}

bool to_switch(std::string_view v)
{
    if (v == "on" || v == "true" || v == "1")
    {
        return true;
    }
    if (v == "off" || v == "false" || v == "0")
    {
        return false;
    }
    bad_value(v, "on|off");
}

std::string show(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return buf;
}

template <typename E, typename Parse>
E parse_enum(std::string_view v, Parse parse)
{
    try
    {
        return parse(v);
    }
    catch (const std::invalid_argument &e)
    {
        throw ConfigError(e.what());
    }
}

#define COLSIM_DOUBLE_KEY(key, field, text)                                                                             \
    ConfigKey                                                                                                           \
    {                                                                                                                   \
        key, text, [](const Settings &s) { return show(s.field); },                                                     \
            [](Settings &s, std::string_view v) { s.field = to_double(v); }                                             \
    }

std::vector<ConfigKey> make_keys()
{
    std::vector<ConfigKey> k = {
        {"grid.width", "grid width in columns", [](const Settings &s) { return std::to_string(s.sim.spec.width); },
         [](Settings &s, std::string_view v) { s.sim.spec.width = to_unsigned<std::uint32_t>(v); }},
        {"grid.height", "grid height in columns", [](const Settings &s) { return std::to_string(s.sim.spec.height); },
         [](Settings &s, std::string_view v) { s.sim.spec.height = to_unsigned<std::uint32_t>(v); }},
        {"grid.boundary", "open|torus", [](const Settings &s) { return std::string(to_string(s.sim.spec.boundary)); },
         [](Settings &s, std::string_view v) { s.sim.spec.boundary = parse_enum<Boundary>(v, parse_boundary); }},
        {"neurons_per_column", "neurons in every column",
         [](const Settings &s) { return std::to_string(s.sim.spec.neurons_per_column); },
         [](Settings &s, std::string_view v) { s.sim.spec.neurons_per_column = to_unsigned<std::uint32_t>(v); }},
        COLSIM_DOUBLE_KEY("excitatory_fraction", sim.spec.excitatory_fraction, "excitatory share of each column"),
        COLSIM_DOUBLE_KEY("p_local", sim.spec.p_local, "connection probability inside a column"),
        COLSIM_DOUBLE_KEY("lateral_A", sim.spec.lateral_amplitude, "amplitude of the lateral Gaussian kernel"),
        COLSIM_DOUBLE_KEY("grid_step_um", sim.spec.grid_step_um, "column spacing (documentation only)"),
        COLSIM_DOUBLE_KEY("cutoff", sim.spec.cutoff, "minimum lateral connection probability"),
        {"c_ext", "external synapses per neuron", [](const Settings &s) { return std::to_string(s.sim.spec.c_ext); },
         [](Settings &s, std::string_view v) { s.sim.spec.c_ext = to_unsigned<std::uint32_t>(v); }},
        COLSIM_DOUBLE_KEY("nu_ext_hz", sim.params.nu_ext, "rate of each external synapse"),
        COLSIM_DOUBLE_KEY("dt_ms", sim.dt_ms, "integration step"),
        COLSIM_DOUBLE_KEY("duration_ms", sim.duration_ms, "simulated time, padded to whole epochs"),
        {"seed", "master seed", [](const Settings &s) { return std::to_string(s.sim.seed); },
         [](Settings &s, std::string_view v) { s.sim.seed = to_unsigned<std::uint64_t>(v); }},
        {"workers", "number of workers", [](const Settings &s) { return std::to_string(s.sim.workers); },
         [](Settings &s, std::string_view v) {
             s.sim.workers = to_unsigned<std::uint32_t>(v);
             if (s.sim.workers == 0)
             {
                 throw ConfigError("workers must be at least 1");
             }
         }},
        {"transport", "inproc|tcp", [](const Settings &s) { return std::string(to_string(s.sim.transport)); },
         [](Settings &s, std::string_view v) { s.sim.transport = parse_enum<TransportKind>(v, parse_transport); }},
        {"tcp.peers", "host:port per worker, comma separated (empty: localhost)",
         [](const Settings &s) {
             std::string out;
             for (const auto &p : s.sim.tcp_peers)
             {
                 out += (out.empty() ? "" : ",") + p.host + ":" + std::to_string(p.port);
             }
             return out;
         },
         [](Settings &s, std::string_view v) {
             try
             {
                 s.sim.tcp_peers = parse_peers(v);
             }
             catch (const std::invalid_argument &e)
             {
                 throw ConfigError(e.what());
             }
         }},
        {"timeout_ms", "transport receive timeout",
         [](const Settings &s) { return std::to_string(s.sim.timeout.count()); },
         [](Settings &s, std::string_view v) { s.sim.timeout = Timeout(to_unsigned<std::uint32_t>(v)); }},
        COLSIM_DOUBLE_KEY("delay_ms", sim.delay_ms, "synaptic delay of every recurrent synapse"),
        {"initial_v", "uniform|rest", [](const Settings &s) { return std::string(to_string(s.sim.initial_v)); },
         [](Settings &s, std::string_view v) { s.sim.initial_v = parse_enum<InitialV>(v, parse_initial_v); }},
        COLSIM_DOUBLE_KEY("model.tau_m", sim.params.tau_m, "membrane time constant, ms"),
        COLSIM_DOUBLE_KEY("model.v_rest", sim.params.v_rest, "resting potential, mV"),
        COLSIM_DOUBLE_KEY("model.theta", sim.params.theta, "firing threshold, mV"),
        COLSIM_DOUBLE_KEY("model.v_reset", sim.params.v_reset, "reset potential, mV"),
        COLSIM_DOUBLE_KEY("model.tau_arp", sim.params.tau_arp, "absolute refractory period, ms"),
        COLSIM_DOUBLE_KEY("model.tau_c", sim.params.tau_c, "adaptation decay, ms"),
        COLSIM_DOUBLE_KEY("model.alpha_c", sim.params.alpha_c, "adaptation increment per spike"),
        COLSIM_DOUBLE_KEY("model.g_c", sim.params.g_c, "adaptation current gain, mV/ms"),
        COLSIM_DOUBLE_KEY("model.j_exc", sim.params.j_exc, "excitatory impulse, mV"),
        COLSIM_DOUBLE_KEY("model.j_inh", sim.params.j_inh, "inhibitory impulse, mV"),
        COLSIM_DOUBLE_KEY("model.j_ext", sim.params.j_ext, "external impulse, mV"),
        {"output.dir", "directory for all outputs", [](const Settings &s) { return s.output_dir.string(); },
         [](Settings &s, std::string_view v) { s.output_dir = std::filesystem::path(std::string(v)); }},
        {"raster", "on|off, write the spike raster", [](const Settings &s) { return std::string(s.sim.record_raster ? "on" : "off"); },
         [](Settings &s, std::string_view v) { s.sim.record_raster = to_switch(v); }},
    };
    return k;
}

#undef COLSIM_DOUBLE_KEY

} // namespace

const std::vector<ConfigKey> &config_keys()
{
    static const std::vector<ConfigKey> keys = make_keys();
    return keys;
}

void apply_setting(Settings &s, std::string_view key, std::string_view value)
{
    for (const auto &k : config_keys())
    {
        if (k.name == key)
        {
            try
            {
                k.set(s, trim(value));
            }
            catch (const ConfigError &e)
            {
                throw ConfigError(std::string(key) + ": " + e.what());
            }
            return;
        }
    }
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

void apply_config_text(Settings &s, std::string_view text, std::string_view origin)
{
    std::size_t line_no = 0;
    while (!text.empty())
    {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#')
        {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
        {
            throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key=value");
        }
        try
        {
            apply_setting(s, trim(line.substr(0, eq)), line.substr(eq + 1));
        }
        catch (const ConfigError &e)
        {
            throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void apply_config_file(Settings &s, const std::filesystem::path &path)
{
    std::ifstream is(path);
    if (!is)
    {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::stringstream ss;
    ss << is.rdbuf();
    apply_config_text(s, ss.str(), path.string());
}

std::pair<std::uint32_t, std::uint32_t> parse_grid(std::string_view text)
{
    const auto x = text.find('x');
    if (x == std::string_view::npos)
    {
        bad_value(text, "WxH");
    }
    const auto w = to_unsigned<std::uint32_t>(text.substr(0, x));
    const auto h = to_unsigned<std::uint32_t>(text.substr(x + 1));
    if (w == 0 || h == 0)
    {
        bad_value(text, "positive grid dimensions");
    }
    return {w, h};
}

std::vector<std::uint32_t> parse_worker_list(std::string_view text)
{
    std::vector<std::uint32_t> out;
    while (true)
    {
        const auto comma = text.find(',');
        const auto n = to_unsigned<std::uint32_t>(trim(text.substr(0, comma)));
        if (n == 0)
        {
            bad_value(text, "positive worker counts");
        }
        out.push_back(n);
        if (comma == std::string_view::npos)
        {
            break;
        }
        text = text.substr(comma + 1);
    }
    return out;
}

std::string describe_keys()
{
    const Settings defaults;
    std::string out;
    for (const auto &k : config_keys())
    {
        out += "  " + std::string(k.name) + " (default: " + k.get(defaults) + ")  " + std::string(k.description) + "\n";
    }
    return out;
}

} // namespace colsim
