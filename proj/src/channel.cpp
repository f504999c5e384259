#include "cobm/channel.hpp"

#include <cmath>
#include <functional>
#include <numbers>

namespace cobm {

namespace {
constexpr double kSpeedOfLight = 299792458.0;  // m/s

std::size_t padded_pow2(std::size_t n, std::size_t margin) {
    std::size_t want = n + 2 * margin;
    std::size_t p = 1;
    while (p < want) p <<= 1;
    return p;
}

// Multiply the spectrum of `s` by h(f) on a zero-padded power-of-two grid,
// then fold the spread tails back modulo the signal length. The result is a
// circular (unitary for |h|=1) operator at the original length, so inverse
// transfer pairs cancel exactly.
void apply_transfer(std::vector<cpx>& s, double fs, const std::function<cpx(double)>& h) {
    const std::size_t n = s.size();
    const std::size_t nfft = padded_pow2(n, 4096);
    std::vector<cpx> buf(nfft, cpx(0, 0));
    std::copy(s.begin(), s.end(), buf.begin());
    dft_inplace(buf, false);
    for (std::size_t k = 0; k < nfft; ++k)
        buf[k] *= h(bin_freq(static_cast<int>(k), static_cast<int>(nfft), fs));
    dft_inplace(buf, true);
    s.assign(buf.begin(), buf.begin() + n);
    // upper half of the padded buffer holds the negative-time precursors
    for (std::size_t j = n; j < nfft; ++j) {
        const long long t = (j < nfft / 2 + n / 2) ? static_cast<long long>(j)
                                                   : static_cast<long long>(j) - nfft;
        const long long idx = ((t % static_cast<long long>(n)) + n) % static_cast<long long>(n);
        s[static_cast<std::size_t>(idx)] += buf[j];
    }
}
}  // namespace

void ChannelConfig::validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("ChannelConfig: alpha must be in [0, 1]");
    if (theta < 0.0 || theta >= 2.0 * std::numbers::pi)
        throw ConfigError("ChannelConfig: theta must be in [0, 2pi)");
    if (std::abs(tau) > 0.5) throw ConfigError("ChannelConfig: |tau| must be <= 0.5 symbol");
    if (fiber_km < 0.0 || lambda_nm <= 0.0 || linewidth_hz < 0.0 || guard_ns < 0.0)
        throw ConfigError("ChannelConfig: rates and lengths must be >= 0");
}

DualPolBurst apply_jones(const DualPolBurst& burst, double alpha, double theta) {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("apply_jones: alpha must be in [0, 1]");
    burst.check();
    const double c = std::sqrt(1.0 - alpha);
    const double s = std::sqrt(alpha);
    const cpx ejt(std::cos(theta), std::sin(theta));
    DualPolBurst out = burst;
    for (std::size_t i = 0; i < burst.size(); ++i) {
        cpx xi = burst.x.samples[i], yi = burst.y.samples[i];
        out.x.samples[i] = c * xi - s * ejt * yi;
        out.y.samples[i] = s * std::conj(ejt) * xi + c * yi;
    }
    return out;
}

DualPolBurst apply_cd(const DualPolBurst& burst, double fiber_km, double disp_ps_nm_km,
                      double lambda_nm) {
    burst.check();
    if (fiber_km == 0.0) return burst;
    const double d_si = disp_ps_nm_km * 1e-6;       // s/m^2
    const double l_si = fiber_km * 1e3;             // m
    const double lambda_si = lambda_nm * 1e-9;      // m
    const double coef = std::numbers::pi * d_si * l_si * lambda_si * lambda_si / kSpeedOfLight;
    DualPolBurst out = burst;
    auto h = [coef](double f) {
        double ph = -coef * f * f;
        return cpx(std::cos(ph), std::sin(ph));
    };
    apply_transfer(out.x.samples, burst.fs(), h);
    apply_transfer(out.y.samples, burst.fs(), h);
    return out;
}

DualPolBurst apply_cfo_pn(const DualPolBurst& burst, double delta_f, double linewidth_hz,
                          uint64_t rng_seed) {
    burst.check();
    DualPolBurst out = burst;
    const double fs = burst.fs();
    const double step = 2.0 * std::numbers::pi * delta_f / fs;
    const double sigma = (linewidth_hz > 0.0)
                             ? std::sqrt(2.0 * std::numbers::pi * linewidth_hz / fs)
                             : 0.0;
    Rng rng(rng_seed);
    double phi = 0.0;
    for (std::size_t i = 0; i < burst.size(); ++i) {
        double ph = step * static_cast<double>(i) + phi;
        cpx rot(std::cos(ph), std::sin(ph));
        out.x.samples[i] *= rot;
        out.y.samples[i] *= rot;
        if (sigma > 0.0) phi += sigma * rng.gaussian();
    }
    return out;
}

DualPolBurst apply_frac_delay(const DualPolBurst& burst, double tau_symbols, double k_os) {
    burst.check();
    if (std::abs(tau_symbols) > 0.5)
        throw ConfigError("apply_frac_delay: |tau| must be <= 0.5 symbol");
    if (tau_symbols == 0.0) return burst;
    const double delay_s = tau_symbols * k_os / burst.fs();
    DualPolBurst out = burst;
    auto h = [delay_s](double f) {
        double ph = -2.0 * std::numbers::pi * f * delay_s;
        return cpx(std::cos(ph), std::sin(ph));
    };
    apply_transfer(out.x.samples, burst.fs(), h);
    apply_transfer(out.y.samples, burst.fs(), h);
    return out;
}

DualPolBurst add_awgn(const DualPolBurst& burst, double snr_db, uint64_t rng_seed) {
    burst.check();
    if (std::isinf(snr_db)) return burst;
    const double px = mean_power(burst.x.samples);
    const double py = mean_power(burst.y.samples);
    if (px <= 0.0 || py <= 0.0) throw ConfigError("add_awgn: zero-power input");
    DualPolBurst out = burst;
    const double snr = std::pow(10.0, snr_db / 10.0);
    const double sx = std::sqrt(px / snr);
    const double sy = std::sqrt(py / snr);
    Rng rng(rng_seed);
    for (auto& v : out.x.samples) v += sx * rng.cgaussian();
    for (auto& v : out.y.samples) v += sy * rng.cgaussian();
    return out;
}

DualPolBurst apply_channel(const DualPolBurst& burst, const ChannelConfig& cfg, double k_os,
                           uint64_t rng_seed) {
    cfg.validate();
    DualPolBurst s = apply_jones(burst, cfg.alpha, cfg.theta);
    s = apply_cd(s, cfg.fiber_km, cfg.disp_ps_nm_km, cfg.lambda_nm);
    s = apply_frac_delay(s, cfg.tau, k_os);
    s = apply_cfo_pn(s, cfg.delta_f, cfg.linewidth_hz, rng_seed);
    s = add_awgn(s, cfg.snr_db, rng_seed + 0x9e37);
    if (cfg.gain_db != 0.0) {
        const double g = std::pow(10.0, cfg.gain_db / 20.0);
        for (auto& v : s.x.samples) v *= g;
        for (auto& v : s.y.samples) v *= g;
    }
    return s;
}

UplinkScene assemble_uplink(const std::vector<TxFrame>& frames,
                            const std::vector<ChannelConfig>& configs, const DspParams& params,
                            uint64_t rng_seed, double converter_fs_hz) {
    if (frames.empty() || frames.size() != configs.size())
        throw ConfigError("assemble_uplink: need >= 1 burst with one config each");
    params.validate();

    UplinkScene scene;
    scene.configs = configs;
    scene.tx = frames;
    scene.stream.x.fs = params.fs();
    scene.stream.y.fs = params.fs();

    std::vector<DualPolBurst> shaped(frames.size());
    for (std::size_t b = 0; b < frames.size(); ++b) {
        DualPolBurst tx{rrc_shape(frames[b].x_symbols, params, params.rrc_span),
                        rrc_shape(frames[b].y_symbols, params, params.rrc_span)};
        if (converter_fs_hz > 0.0) {
            // DAC/ADC emulation: out to the converter rate and back.
            tx.x = resample(tx.x, converter_fs_hz);
            tx.y = resample(tx.y, converter_fs_hz);
            tx.x = resample(tx.x, params.fs());
            tx.y = resample(tx.y, params.fs());
        }
        shaped[b] = apply_channel(tx, configs[b], params.k_os, rng_seed + 1000003ULL * b);
    }

    // guard durations use the first config (one shared TDMA slot plan)
    scene.guard_samples =
        static_cast<std::size_t>(std::llround(configs.front().guard_ns * 1e-9 * params.fs()));
    auto push_guard = [&]() {
        scene.stream.x.samples.insert(scene.stream.x.samples.end(), scene.guard_samples, cpx(0, 0));
        scene.stream.y.samples.insert(scene.stream.y.samples.end(), scene.guard_samples, cpx(0, 0));
    };
    push_guard();
    for (std::size_t b = 0; b < shaped.size(); ++b) {
        scene.burst_starts.push_back(scene.stream.x.samples.size());
        scene.stream.x.samples.insert(scene.stream.x.samples.end(), shaped[b].x.samples.begin(),
                                      shaped[b].x.samples.end());
        scene.stream.y.samples.insert(scene.stream.y.samples.end(), shaped[b].y.samples.begin(),
                                      shaped[b].y.samples.end());
        push_guard();
    }
    return scene;
}

}  // namespace cobm
