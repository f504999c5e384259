// Shared fixtures for receiver tests: steady-state preamble segments and
// impaired single-burst scenes.

#pragma once

#include "cobm/bmdsp.hpp"
#include "cobm/channel.hpp"

namespace cobm::test {

inline DspParams params32() {
    DspParams p;
    p.rs = 32e9;
    p.k_os = 2.0;
    p.n_dft = 1024;
    p.rolloff = 0.1;
    p.rrc_span = 32;
    return p;
}

// Steady-state shaped Preamble A segment: n_symbols at 2 samples/symbol,
// taken from the middle of a long periodic extension so filter transients
// are absent.
inline DualPolBurst preamble_a_segment(const DspParams& p, int n_symbols = 128) {
    auto a = gen_preamble_a();
    const int reps = 2 * n_symbols / PreambleA::length + 4;
    std::vector<cpx> xs, ys;
    for (int r = 0; r < reps; ++r) {
        xs.insert(xs.end(), a.x_symbols.begin(), a.x_symbols.end());
        ys.insert(ys.end(), a.y_symbols.begin(), a.y_symbols.end());
    }
    DualPolBurst full{rrc_shape(xs, p, p.rrc_span), rrc_shape(ys, p, p.rrc_span)};
    const int k = static_cast<int>(p.k_os);
    const std::size_t start = static_cast<std::size_t>(PreambleA::length) * k;
    const std::size_t len = static_cast<std::size_t>(n_symbols) * k;
    DualPolBurst seg;
    seg.x.fs = full.fs();
    seg.y.fs = full.fs();
    seg.x.samples.assign(full.x.samples.begin() + start, full.x.samples.begin() + start + len);
    seg.y.samples.assign(full.y.samples.begin() + start, full.y.samples.begin() + start + len);
    return seg;
}

// Channel config with every impairment off (the spec default keeps a
// 200 kHz linewidth, which is not what "identity" tests mean).
inline ChannelConfig clean_channel() {
    ChannelConfig cfg;
    cfg.linewidth_hz = 0.0;
    return cfg;
}

// One impaired burst in a guarded uplink stream.
inline UplinkScene one_burst_scene(const DspParams& p, const ChannelConfig& cfg, uint64_t seed) {
    auto grid = QamGrid::qam16();
    auto frame = random_frame(seed, grid, FrameLayout{});
    return assemble_uplink({frame}, {cfg}, p, seed);
}

// Interior slice, for keeping estimator windows away from filter edges.
inline DualPolBurst slice(const DualPolBurst& b, std::size_t start, std::size_t len) {
    DualPolBurst out;
    out.x.fs = b.x.fs;
    out.y.fs = b.y.fs;
    out.x.samples.assign(b.x.samples.begin() + start, b.x.samples.begin() + start + len);
    out.y.samples.assign(b.y.samples.begin() + start, b.y.samples.begin() + start + len);
    return out;
}

inline double max_err(const DualPolBurst& a, const DualPolBurst& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.x.samples[i] - b.x.samples[i]));
        m = std::max(m, std::abs(a.y.samples[i] - b.y.samples[i]));
    }
    return m;
}

}  // namespace cobm::test
