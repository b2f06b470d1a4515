#pragma once

// Leaky integrate-and-fire neuron with a single spike-frequency adaptation
// variable. Membrane and adaptation decay are integrated exactly over a step;
// synaptic input arrives as voltage jumps at the end of the step.

#include <cstdint>
#include <span>

namespace colsim
{

struct NeuronParams
{
    double tau_m = 20.0;   // ms
    double v_rest = 0.0;   // mV
    double theta = 20.0;   // mV
    double v_reset = 10.0; // mV
    double tau_arp = 2.0;  // ms
    double tau_c = 300.0;  // ms
    double alpha_c = 1.0;  // adaptation increment per spike
    double g_c = 0.01;     // mV/ms per unit adaptation
    double j_exc = 0.2;    // mV
    double j_inh = -1.5;   // mV
    double j_ext = 0.6;    // mV
    double nu_ext = 3.0;   // Hz per external synapse

    void validate() const;
};

struct NeuronState
{
    double v = 0.0;
    double c = 0.0;
    std::uint32_t refractory_steps_left = 0;

    friend bool operator==(const NeuronState &, const NeuronState &) = default;
};

/// Step-size dependent factors, computed once per run.
struct StepConstants
{
    double dt = 0.1;
    double membrane_decay = 0.0;   // exp(-dt/tau_m)
    double adaptation_decay = 0.0; // exp(-dt/tau_c)
    double adaptation_gain = 0.0;  // g_c * tau_m * (1 - membrane_decay)
    std::uint32_t refractory_steps = 0;

    StepConstants(const NeuronParams &params, double dt_ms);
};

struct StepResult
{
    NeuronState state;
    bool spiked = false;
};

/// One step: exact exponential decay of v toward v_rest and of c toward 0,
/// the adaptation current, then the summed impulse as a voltage jump.
/// Refractory neurons are clamped at v_reset and ignore input; nothing else
/// about them changes except the countdown.
inline StepResult advance_neuron(const NeuronState &state, double summed_impulse, const NeuronParams &params,
                                 const StepConstants &k)
{
    StepResult out{state, false};
    NeuronState &s = out.state;
    if (s.refractory_steps_left > 0)
    {
        s.v = params.v_reset;
        --s.refractory_steps_left;
        return out;
    }
    s.v = params.v_rest + (s.v - params.v_rest) * k.membrane_decay - k.adaptation_gain * s.c + summed_impulse;
    s.c *= k.adaptation_decay;
    if (s.v >= params.theta)
    {
        out.spiked = true;
        s.v = params.v_reset;
        s.c += params.alpha_c;
        s.refractory_steps_left = k.refractory_steps;
    }
    return out;
}

inline StepResult advance_neuron(const NeuronState &state, double summed_impulse, const NeuronParams &params,
                                 double dt_ms)
{
    return advance_neuron(state, summed_impulse, params, StepConstants(params, dt_ms));
}

struct Delivery
{
    std::uint32_t source = 0;
    double weight = 0.0;
};

/// Left-to-right sum of deliveries already sorted by source id. Debug builds
/// assert the ordering.
double summed_impulse(std::span<const Delivery> deliveries);

} // namespace colsim
