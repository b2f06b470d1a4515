#include "colsim/model.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <string>

namespace colsim
{

void NeuronParams::validate() const
{
    auto fail = [](const char *what) { throw std::invalid_argument(std::string("neuron params: ") + what); };
    if (!(tau_m > 0.0) || !(tau_c > 0.0) || !(tau_arp > 0.0))
    {
        fail("time constants must be positive");
    }
    if (!(theta > v_rest))
    {
        fail("threshold must exceed resting potential");
    }
    if (!(j_inh <= 0.0 && j_exc >= 0.0))
    {
        fail("expected j_inh <= 0 <= j_exc");
    }
    if (!(nu_ext >= 0.0))
    {
        fail("external rate must be non-negative");
    }
    if (!(alpha_c >= 0.0) || !(g_c >= 0.0))
    {
        fail("adaptation increment and gain must be non-negative");
    }
}

StepConstants::StepConstants(const NeuronParams &params, double dt_ms)
    : dt(dt_ms)
{
    if (!(dt_ms > 0.0))
    {
        throw std::invalid_argument("dt must be positive");
    }
    membrane_decay = std::exp(-dt_ms / params.tau_m);
    adaptation_decay = std::exp(-dt_ms / params.tau_c);
    adaptation_gain = params.g_c * params.tau_m * (1.0 - membrane_decay);
    refractory_steps = static_cast<std::uint32_t>(std::lround(params.tau_arp / dt_ms));
}

double summed_impulse(std::span<const Delivery> deliveries)
{
    double sum = 0.0;
    for (std::size_t i = 0; i < deliveries.size(); ++i)
    {
        assert(i == 0 || deliveries[i - 1].source <= deliveries[i].source);
        sum += deliveries[i].weight;
    }
    return sum;
}

} // namespace colsim
