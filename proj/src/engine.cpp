#include "colsim/engine.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace colsim
{

std::string_view to_string(InitialV policy)
{
    return policy == InitialV::rest ? "rest" : "uniform";
}

InitialV parse_initial_v(std::string_view text)
{
    if (text == "uniform")
    {
        return InitialV::uniform;
    }
    if (text == "rest")
    {
        return InitialV::rest;
    }
    throw std::invalid_argument("unknown initial_v policy '" + std::string(text) + "' (expected uniform|rest)");
}

MemoryAccount &MemoryAccount::operator+=(const MemoryAccount &o)
{
    synapse_bytes += o.synapse_bytes;
    index_bytes += o.index_bytes;
    ring_bytes += o.ring_bytes;
    neuron_bytes += o.neuron_bytes;
    buffer_bytes += o.buffer_bytes;
    return *this;
}

void SimConfig::validate() const
{
    spec.validate();
    params.validate();
    if (!(dt_ms > 0.0))
    {
        throw std::invalid_argument("dt must be positive");
    }
    if (!(duration_ms >= 0.0))
    {
        throw std::invalid_argument("duration must be non-negative");
    }
    (void)synapse_policy();
    (void)assign_columns(spec, workers);
    for (WorkerId w : local_workers)
    {
        if (w >= workers)
        {
            throw std::invalid_argument("local worker " + std::to_string(w) + " out of range");
        }
    }
    if (transport == TransportKind::tcp && !tcp_peers.empty() && tcp_peers.size() != workers)
    {
        throw std::invalid_argument("tcp peer list must name one address per worker");
    }
    if (epoch_count() > 0xFFFFFFFFull)
    {
        throw std::invalid_argument("run exceeds 2^32 epochs");
    }
}

std::uint64_t SimConfig::epoch_count() const
{
    const double steps = std::ceil(duration_ms / dt_ms - 1e-9);
    const std::uint64_t e = epoch_steps();
    const auto n = static_cast<std::uint64_t>(std::max(0.0, steps));
    return (n + e - 1) / e;
}

namespace
{

using Clock = std::chrono::steady_clock;

struct Target
{
    std::uint32_t neuron; // worker-local index
    float weight;
};

// Incoming synapses of one owned column, regrouped by source neuron. Sources
// are addressed as (block of the source column in src_cols, local index).
struct ColumnFanout
{
    std::vector<std::uint32_t> src_cols;
    std::vector<std::uint32_t> offsets;
    std::vector<Target> entries;
};

struct SourceReach
{
    std::uint32_t fanout;
    std::uint32_t block;
};

struct WorkerResult
{
    std::uint64_t recurrent_events = 0;
    std::uint64_t external_events = 0;
    std::uint64_t delivered_events = 0;
    std::uint64_t spikes = 0;
    std::uint64_t synapses = 0;
    std::uint64_t exchange_rounds = 0;
    MemoryAccount memory;
    double build_seconds = 0.0;
    Clock::time_point loop_start;
    Clock::time_point loop_end;
    std::vector<SpikeEvent> raster;
};

class Worker
{
  public:
    Worker(const SimConfig &config, const Partition &partition, const RoutingTable &routes, WorkerId self)
        : cfg_(config)
        , spec_(config.spec)
        , partition_(partition)
        , routes_(routes)
        , self_(self)
        , npc_(config.spec.neurons_per_column)
        , delay_(config.epoch_steps())
        , k_(config.params, config.dt_ms)
        , drive_(config.spec, config.params, config.dt_ms, config.seed)
    {
    }

    void build()
    {
        const auto t0 = Clock::now();
        const std::uint32_t first = partition_.begin(self_);
        const std::uint32_t owned = partition_.owned_count(self_);
        first_gid_ = global_id(first, 0, spec_);
        neuron_count_ = owned * npc_;
        reach_.assign(spec_.column_count(), {});
        fanouts_.resize(owned);
        const SynapsePolicy policy = cfg_.synapse_policy();
        for (std::uint32_t i = 0; i < owned; ++i)
        {
            build_column(i, ColumnId::from_linear(first + i, spec_), policy);
        }

        neurons_.resize(neuron_count_);
        ext_prefix_.resize(neuron_count_);
        for (std::uint32_t i = 0; i < neuron_count_; ++i)
        {
            ext_prefix_[i] = drive_.neuron_prefix(first_gid_ + i);
            if (cfg_.initial_v == InitialV::uniform)
            {
                neurons_[i].v = initial_membrane(first_gid_ + i, cfg_.params, cfg_.seed);
            }
            else
            {
                neurons_[i].v = cfg_.params.v_rest;
            }
        }
        acc_.assign(neuron_count_, 0.0);
        ring_.resize(delay_ + 1);
        result_.build_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    }

    void simulate(Endpoint *endpoint)
    {
        result_.loop_start = Clock::now();
        const std::uint64_t epochs = cfg_.epoch_count();
        const std::uint32_t epoch_steps = cfg_.epoch_steps();
        SpikeBatch outbound;
        outbound.source_worker = self_;
        std::vector<std::uint32_t> fired;
        for (std::uint64_t epoch = 0; epoch < epochs; ++epoch)
        {
            outbound.epoch = static_cast<std::uint32_t>(epoch);
            outbound.records.clear();
            for (std::uint32_t offset = 0; offset < epoch_steps; ++offset)
            {
                const std::uint64_t step = epoch * epoch_steps + offset;
                deliver(step);
                fired.clear();
                update_neurons(step, fired);
                for (std::uint32_t gid : fired)
                {
                    schedule(gid, step);
                    outbound.records.push_back({gid, static_cast<std::uint16_t>(offset)});
                }
            }
            if (!routes_.send_to[self_].empty() || !routes_.receive_from[self_].empty())
            {
                exchange(*endpoint, outbound, epoch_steps);
            }
            peak_batch_ = std::max(peak_batch_, outbound.records.capacity());
        }
        if (endpoint != nullptr)
        {
            terminate(*endpoint, static_cast<std::uint32_t>(epochs));
        }
        result_.loop_end = Clock::now();
        account_memory();
    }

    WorkerResult take_result() { return std::move(result_); }

  private:
    void build_column(std::uint32_t index, ColumnId col, SynapsePolicy policy)
    {
        IncomingTable table = generate_incoming(col, spec_, cfg_.params, policy, cfg_.seed);
        ColumnFanout &f = fanouts_[index];
        for (const auto &r : columns_in_reach(col, spec_))
        {
            f.src_cols.push_back(r.column.linear(spec_));
        }
        std::sort(f.src_cols.begin(), f.src_cols.end());
        f.src_cols.erase(std::unique(f.src_cols.begin(), f.src_cols.end()), f.src_cols.end());
        for (std::uint32_t b = 0; b < f.src_cols.size(); ++b)
        {
            reach_[f.src_cols[b]].push_back({index, b});
        }

        auto key_of = [&](std::uint32_t source) {
            const std::uint32_t col_id = source / npc_;
            const auto block = static_cast<std::uint32_t>(
                std::lower_bound(f.src_cols.begin(), f.src_cols.end(), col_id) - f.src_cols.begin());
            return std::size_t{block} * npc_ + source % npc_;
        };
        f.offsets.assign(f.src_cols.size() * npc_ + 1, 0);
        for (const Synapse &syn : table.synapses)
        {
            if (syn.delay_steps != delay_)
            {
                throw std::logic_error("engine expects a uniform synaptic delay");
            }
            ++f.offsets[key_of(syn.source) + 1];
        }
        std::partial_sum(f.offsets.begin(), f.offsets.end(), f.offsets.begin());
        if (table.synapses.size() > 0xFFFFFFFFull)
        {
            throw std::length_error("column has more than 2^32 incoming synapses");
        }
        f.entries.resize(table.synapses.size());
        std::vector<std::uint32_t> cursor(f.offsets.begin(), f.offsets.end() - 1);
        for (std::uint32_t t = 0; t < table.neuron_count(); ++t)
        {
            const std::uint32_t neuron = index * npc_ + t;
            for (const Synapse &syn : table.incoming(t))
            {
                f.entries[cursor[key_of(syn.source)]++] = {neuron, syn.weight};
            }
        }
        result_.synapses += table.synapses.size();
    }

    std::uint64_t local_fanout(std::uint32_t gid) const
    {
        std::uint64_t n = 0;
        const std::uint32_t local = gid % npc_;
        for (const SourceReach &r : reach_[gid / npc_])
        {
            const ColumnFanout &f = fanouts_[r.fanout];
            const std::size_t key = std::size_t{r.block} * npc_ + local;
            n += f.offsets[key + 1] - f.offsets[key];
        }
        return n;
    }

    // A spike emitted at `step` is due at step + delay.
    void schedule(std::uint32_t gid, std::uint64_t step)
    {
        const std::uint64_t fanout = local_fanout(gid);
        if (fanout == 0)
        {
            return;
        }
        result_.recurrent_events += fanout;
        ring_[(step + delay_) % ring_.size()].push_back(gid);
    }

    void deliver(std::uint64_t step)
    {
        auto &slot = ring_[step % ring_.size()];
        if (slot.empty())
        {
            return;
        }
        // Ascending source order makes every per-neuron sum independent of
        // arrival order and therefore of the partition.
        std::sort(slot.begin(), slot.end());
        for (std::uint32_t gid : slot)
        {
            const std::uint32_t local = gid % npc_;
            for (const SourceReach &r : reach_[gid / npc_])
            {
                const ColumnFanout &f = fanouts_[r.fanout];
                const std::size_t key = std::size_t{r.block} * npc_ + local;
                const std::uint32_t begin = f.offsets[key];
                const std::uint32_t end = f.offsets[key + 1];
                for (std::uint32_t i = begin; i < end; ++i)
                {
                    acc_[f.entries[i].neuron] += static_cast<double>(f.entries[i].weight);
                }
                result_.delivered_events += end - begin;
            }
        }
        peak_slot_ = std::max(peak_slot_, slot.capacity());
        slot.clear();
    }

    void update_neurons(std::uint64_t step, std::vector<std::uint32_t> &fired)
    {
        const NeuronParams &params = cfg_.params;
        for (std::uint32_t i = 0; i < neuron_count_; ++i)
        {
            const std::uint32_t gid = first_gid_ + i;
            double impulse = acc_[i];
            acc_[i] = 0.0;
            // External arrivals follow all recurrent sources in summation order.
            const std::uint32_t arrivals = drive_.arrivals_from_prefix(ext_prefix_[i], step);
            result_.external_events += arrivals;
            for (std::uint32_t a = 0; a < arrivals; ++a)
            {
                impulse += params.j_ext;
            }
            const StepResult r = advance_neuron(neurons_[i], impulse, params, k_);
            neurons_[i] = r.state;
            if (r.spiked)
            {
                fired.push_back(gid);
                ++result_.spikes;
                if (cfg_.record_raster)
                {
                    result_.raster.push_back({step, gid});
                }
            }
        }
    }

    void exchange(Endpoint &endpoint, const SpikeBatch &outbound, std::uint32_t epoch_steps)
    {
        if (!routes_.send_to[self_].empty())
        {
            const Bytes frame = encode(outbound);
            for (WorkerId peer : routes_.send_to[self_])
            {
                endpoint.send(peer, frame);
            }
        }
        for (WorkerId peer : routes_.receive_from[self_])
        {
            const SpikeBatch batch = decode(endpoint.recv(peer));
            if (batch.epoch != outbound.epoch || batch.source_worker != peer)
            {
                throw TransportError("protocol error: worker " + std::to_string(self_) + " expected epoch " +
                                     std::to_string(outbound.epoch) + " from worker " + std::to_string(peer) +
                                     ", got epoch " + std::to_string(batch.epoch) + " from worker " +
                                     std::to_string(batch.source_worker));
            }
            const std::uint64_t base = std::uint64_t{batch.epoch} * epoch_steps;
            for (const SpikeRecord &rec : batch.records)
            {
                if (rec.step_offset >= epoch_steps)
                {
                    throw TransportError("protocol error: step offset outside the epoch");
                }
                schedule(rec.gid, base + rec.step_offset);
            }
            peak_batch_ = std::max(peak_batch_, batch.records.size());
        }
        result_.exchange_rounds += routes_.receive_from[self_].size();
    }

    void terminate(Endpoint &endpoint, std::uint32_t epochs)
    {
        for (WorkerId peer : routes_.send_to[self_])
        {
            endpoint.send(peer, encode_terminate(self_, epochs));
        }
        for (WorkerId peer : routes_.receive_from[self_])
        {
            const Bytes frame = endpoint.recv(peer);
            const FrameHeader h = decode_header(frame);
            if (h.type != MsgType::terminate || h.epoch != epochs || h.source_worker != peer)
            {
                throw TransportError("protocol error: expected terminate from worker " + std::to_string(peer));
            }
        }
    }

    void account_memory()
    {
        MemoryAccount &m = result_.memory;
        for (const ColumnFanout &f : fanouts_)
        {
            m.synapse_bytes += f.entries.capacity() * sizeof(Target);
            m.index_bytes += f.offsets.capacity() * sizeof(std::uint32_t) + f.src_cols.capacity() * sizeof(std::uint32_t);
        }
        m.index_bytes += reach_.capacity() * sizeof(std::vector<SourceReach>);
        for (const auto &r : reach_)
        {
            m.index_bytes += r.capacity() * sizeof(SourceReach);
        }
        m.ring_bytes += ring_.capacity() * sizeof(std::vector<std::uint32_t>) +
                        ring_.size() * peak_slot_ * sizeof(std::uint32_t);
        m.neuron_bytes += neurons_.capacity() * sizeof(NeuronState) + acc_.capacity() * sizeof(double) +
                          ext_prefix_.capacity() * sizeof(std::uint64_t);
        // One outbound and one inbound batch per route, header plus records.
        const std::size_t peers = routes_.send_to[self_].size() + routes_.receive_from[self_].size();
        m.buffer_bytes += peers * (frame_header_size + 4 + peak_batch_ * 6);
    }

    const SimConfig &cfg_;
    const GridSpec &spec_;
    const Partition &partition_;
    const RoutingTable &routes_;
    WorkerId self_;
    std::uint32_t npc_;
    std::uint32_t delay_;
    StepConstants k_;
    ExternalDrive drive_;

    std::uint32_t first_gid_ = 0;
    std::uint32_t neuron_count_ = 0;
    std::vector<ColumnFanout> fanouts_;
    std::vector<std::vector<SourceReach>> reach_; // by source column
    std::vector<NeuronState> neurons_;
    std::vector<std::uint64_t> ext_prefix_;
    std::vector<double> acc_;
    std::vector<std::vector<std::uint32_t>> ring_;
    std::size_t peak_slot_ = 0;
    std::size_t peak_batch_ = 0;
    WorkerResult result_;
};

std::vector<WorkerId> neighbours_of(const RoutingTable &routes, WorkerId w)
{
    std::vector<WorkerId> n = routes.send_to[w];
    n.insert(n.end(), routes.receive_from[w].begin(), routes.receive_from[w].end());
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
    return n;
}

} // namespace

RunReport run(const SimConfig &config)
{
    config.validate();
    const Partition partition = assign_columns(config.spec, config.workers);
    const RoutingTable routes = routing_table(partition, config.spec);

    std::vector<WorkerId> local = config.local_workers;
    if (local.empty())
    {
        local.resize(config.workers);
        std::iota(local.begin(), local.end(), WorkerId{0});
    }

    std::optional<InProcFabric> fabric;
    std::vector<PeerAddress> peers = config.tcp_peers;
    if (config.workers > 1)
    {
        if (config.transport == TransportKind::inproc)
        {
            if (local.size() != config.workers)
            {
                throw std::invalid_argument("in-process transport needs every worker in one process");
            }
            fabric.emplace(config.workers, config.timeout);
        }
        else if (peers.empty())
        {
            peers = localhost_peers(config.workers, find_free_port_range(config.workers));
        }
    }

    std::vector<WorkerResult> results(local.size());
    std::vector<std::exception_ptr> errors(local.size());
    std::barrier start_line(static_cast<std::ptrdiff_t>(local.size()));
    std::atomic<bool> failed{false};

    auto body = [&](std::size_t slot) {
        const WorkerId self = local[slot];
        bool arrived = false;
        try
        {
            Worker worker(config, partition, routes, self);
            worker.build();
            std::unique_ptr<Endpoint> endpoint;
            if (config.workers > 1)
            {
                endpoint = fabric ? fabric->endpoint(self)
                                  : connect_tcp(self, peers, neighbours_of(routes, self), config.timeout);
            }
            start_line.arrive_and_wait();
            arrived = true;
            if (failed.load())
            {
                return;
            }
            worker.simulate(endpoint.get());
            results[slot] = worker.take_result();
        }
        catch (...)
        {
            errors[slot] = std::current_exception();
            failed.store(true);
            if (fabric)
            {
                fabric->abort();
            }
            if (!arrived)
            {
                start_line.arrive_and_drop();
            }
        }
    };

    if (local.size() == 1)
    {
        body(0);
    }
    else
    {
        std::vector<std::thread> threads;
        threads.reserve(local.size());
        for (std::size_t i = 0; i < local.size(); ++i)
        {
            threads.emplace_back(body, i);
        }
        for (auto &t : threads)
        {
            t.join();
        }
    }
    // Report the root cause rather than the timeouts it induced elsewhere.
    for (auto &e : errors)
    {
        if (e)
        {
            try
            {
                std::rethrow_exception(e);
            }
            catch (const TransportError &)
            {
                continue;
            }
            catch (...)
            {
                throw;
            }
        }
    }
    for (auto &e : errors)
    {
        if (e)
        {
            std::rethrow_exception(e);
        }
    }

    RunReport rep;
    rep.epochs = config.epoch_count();
    rep.steps = config.step_count();
    rep.simulated_ms = static_cast<double>(rep.steps) * config.dt_ms;
    Clock::time_point start = results.front().loop_start;
    Clock::time_point end = results.front().loop_end;
    for (const WorkerResult &r : results)
    {
        rep.recurrent_events += r.recurrent_events;
        rep.external_events += r.external_events;
        rep.delivered_events += r.delivered_events;
        rep.spikes_total += r.spikes;
        rep.realized_synapses += r.synapses;
        rep.exchange_rounds += r.exchange_rounds;
        rep.memory += r.memory;
        rep.build_seconds = std::max(rep.build_seconds, r.build_seconds);
        start = std::min(start, r.loop_start);
        end = std::max(end, r.loop_end);
        rep.raster.insert(rep.raster.end(), r.raster.begin(), r.raster.end());
    }
    for (WorkerId w : local)
    {
        rep.neurons += std::uint64_t{partition.owned_count(w)} * config.spec.neurons_per_column;
        rep.routes += routes.receive_from[w].size();
    }
    std::sort(rep.raster.begin(), rep.raster.end());
    rep.total_events = rep.recurrent_events + rep.external_events;
    rep.wall_seconds = std::max(std::chrono::duration<double>(end - start).count(), 1e-9);
    rep.time_per_event = rep.total_events > 0 ? rep.wall_seconds / static_cast<double>(rep.total_events) : 0.0;
    if (rep.neurons > 0 && rep.simulated_ms > 0.0)
    {
        rep.mean_rate_hz = static_cast<double>(rep.spikes_total) / (static_cast<double>(rep.neurons) * rep.simulated_ms * 1e-3);
    }
    rep.peak_accounted_bytes = rep.memory.total();
    return rep;
}

std::string format_time_ms(std::uint64_t step, double dt_ms)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9f", static_cast<double>(step) * dt_ms);
    std::string s(buf);
    if (s.find('.') != std::string::npos)
    {
        while (s.back() == '0')
        {
            s.pop_back();
        }
        if (s.back() == '.')
        {
            s.pop_back();
        }
    }
    return s;
}

void raster_dump(const RunReport &report, double dt_ms, const std::filesystem::path &path)
{
    std::ofstream os(path, std::ios::trunc);
    if (!os)
    {
        throw std::runtime_error("cannot open raster file " + path.string());
    }
    for (const SpikeEvent &e : report.raster)
    {
        os << format_time_ms(e.step, dt_ms) << '\t' << e.gid << '\n';
    }
    if (!os.flush())
    {
        throw std::runtime_error("failed writing raster file " + path.string());
    }
}

} // namespace colsim
