// Config-file schema for the experiment runner: one JSON document drives
// frame layout, DSP parameters, channel impairments, loop settings and
// sweeps. Unknown keys are rejected.

#pragma once

#include "cobm/bmdsp.hpp"

namespace cobm {

struct ExperimentConfig {
    DspParams dsp;
    FrameLayout layout;
    ChannelConfig channel;                 // shared by all bursts
    std::vector<double> burst_gains_db{0.0, -3.0};
    LoopConfig loop;
    std::string method = "mmse";           // mmse | zf
    std::vector<uint64_t> seeds{1};
    double ber_threshold = 2.4e-2;
    double converter_fs_hz = 0.0;          // 0 = no DAC/ADC emulation
    std::string out_dir = ".";
    std::string sweep_variable;            // snr_db | l_b | delta_f | tau (empty = none)
    std::vector<double> sweep_values;

    int n_bursts() const { return static_cast<int>(burst_gains_db.size()); }
    void validate() const;
    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig defaults();
};

// Builds the TDMA scene described by the config (all bursts, one seed).
UplinkScene scene_from_config(const ExperimentConfig& cfg, uint64_t seed);

RxOptions rx_options_from_config(const ExperimentConfig& cfg);

}  // namespace cobm
