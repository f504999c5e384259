// Forward impairment models: polarization rotation (Jones), chromatic
// dispersion, carrier offset + laser phase noise, fractional-symbol delay,
// AWGN, and multi-burst TDMA uplink assembly.

#pragma once

#include <limits>

#include "cobm/preambles.hpp"
#include "cobm/sigcore.hpp"

namespace cobm {

struct ChannelConfig {
    double alpha = 0.0;          // power split ratio, [0, 1]
    double theta = 0.0;          // relative phase, [0, 2pi)
    double delta_f = 0.0;        // carrier frequency offset, Hz
    double tau = 0.0;            // sampling phase offset, fraction of a symbol
    double fiber_km = 0.0;
    double disp_ps_nm_km = 17.0;
    double lambda_nm = 1550.0;
    double linewidth_hz = 200e3; // combined Tx+LO linewidth
    double snr_db = std::numeric_limits<double>::infinity();  // per pol, at the simulation rate
    double guard_ns = 45.0;
    double gain_db = 0.0;        // per-burst amplitude offset

    void validate() const;
};

DualPolBurst apply_jones(const DualPolBurst& burst, double alpha, double theta);
DualPolBurst apply_cd(const DualPolBurst& burst, double fiber_km, double disp_ps_nm_km = 17.0,
                      double lambda_nm = 1550.0);
DualPolBurst apply_cfo_pn(const DualPolBurst& burst, double delta_f, double linewidth_hz,
                          uint64_t rng_seed);
DualPolBurst apply_frac_delay(const DualPolBurst& burst, double tau_symbols, double k_os);
DualPolBurst add_awgn(const DualPolBurst& burst, double snr_db, uint64_t rng_seed);

// All impairments of one config in physical order:
// Jones -> CD -> fractional delay -> CFO/phase noise -> AWGN.
DualPolBurst apply_channel(const DualPolBurst& burst, const ChannelConfig& cfg, double k_os,
                           uint64_t rng_seed);

struct UplinkScene {
    DualPolBurst stream;                  // [guard | burst1 | guard | burst2 | ... | guard]
    std::vector<ChannelConfig> configs;   // one per burst
    std::vector<TxFrame> tx;              // ground truth per burst
    std::vector<std::size_t> burst_starts;  // sample index of each burst in `stream`
    std::size_t guard_samples = 0;
};

// Shape each frame, apply its channel config and gain, then concatenate with
// guard gaps. All bursts share params (rate, shaping).
UplinkScene assemble_uplink(const std::vector<TxFrame>& frames,
                            const std::vector<ChannelConfig>& configs, const DspParams& params,
                            uint64_t rng_seed, double converter_fs_hz = 0.0);

}  // namespace cobm
