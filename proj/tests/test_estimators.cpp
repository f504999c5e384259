#include <cmath>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"

using namespace cobm;
using namespace cobm::test;

TEST_CASE("detect_frame finds a clean burst and its tones") {
    auto p = params32();
    ChannelConfig cfg = clean_channel();  // identity channel, no noise
    auto scene = one_burst_scene(p, cfg, 1);
    auto det = detect_frame(scene.stream, p);
    const double true_start = static_cast<double>(scene.burst_starts[0]);
    CHECK(std::abs(static_cast<double>(det.arrival) - true_start) <= 128.0);
    CHECK(std::abs(det.coarse_df_hz) <= p.fs() / p.n_dft);
}

TEST_CASE("detect_frame coarse offset within one DFT bin at 2 GHz") {
    auto p = params32();
    ChannelConfig cfg = clean_channel();
    cfg.delta_f = 2e9;
    cfg.snr_db = 20.0;
    auto scene = one_burst_scene(p, cfg, 2);
    auto det = detect_frame(scene.stream, p);
    CHECK(std::abs(det.coarse_df_hz - 2e9) <= p.fs() / p.n_dft);  // 62.5 MHz bins
}

TEST_CASE("detect_frame rejects pure noise") {
    auto p = params32();
    DualPolBurst noise;
    noise.x.fs = noise.y.fs = p.fs();
    Rng rng(3);
    noise.x.samples.resize(20000);
    noise.y.samples.resize(20000);
    for (auto& v : noise.x.samples) v = rng.cgaussian();
    for (auto& v : noise.y.samples) v = rng.cgaussian();
    CHECK_THROWS_AS(detect_frame(noise, p), SyncError);
}

TEST_CASE("estimate_sop identity channel") {
    auto p = params32();
    auto seg = preamble_a_segment(p);
    auto est = estimate_sop(seg, p);
    CHECK(est.alpha_hat <= 1e-3);
}

TEST_CASE("estimate_sop recovers random rotations exactly when noiseless") {
    auto p = params32();
    auto seg = preamble_a_segment(p);
    Rng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const double alpha = 0.02 + 0.96 * rng.uniform();
        const double theta = 2.0 * std::numbers::pi * rng.uniform();
        auto rx = apply_jones(seg, alpha, theta);
        auto est = estimate_sop(rx, p);
        CHECK(std::abs(est.alpha_hat - alpha) <= 1e-3);
        double derr = std::abs(std::remainder(est.theta_hat - theta, 2.0 * std::numbers::pi));
        CHECK(derr <= 5e-3);
    }
    // the documented example point
    auto rx = apply_jones(seg, 0.3, 1.0);
    auto est = estimate_sop(rx, p);
    CHECK(std::abs(est.alpha_hat - 0.3) <= 1e-3);
    CHECK(std::abs(std::remainder(est.theta_hat - 1.0, 2.0 * std::numbers::pi)) <= 5e-3);
}

TEST_CASE("estimate_sop rejects a noise-only segment") {
    auto p = params32();
    DualPolBurst noise;
    noise.x.fs = noise.y.fs = p.fs();
    Rng rng(9);
    noise.x.samples.resize(256);
    noise.y.samples.resize(256);
    for (auto& v : noise.x.samples) v = rng.cgaussian();
    for (auto& v : noise.y.samples) v = rng.cgaussian();
    CHECK_THROWS_AS(estimate_sop(noise, p), EstimationError);
}

TEST_CASE("power sum versus theta is a pure sinusoid") {
    // Oracle: rotate the received segment with candidate theta via
    // recover_sop, measure the on-polarization tone power sum, and check a
    // 3-parameter sinusoid fitted to 8 samples reproduces a 360-point grid.
    auto p = params32();
    auto seg = preamble_a_segment(p);
    auto rx = apply_jones(seg, 0.35, 2.2);
    const int k = static_cast<int>(p.k_os);
    const std::size_t n = 256;
    auto tone_sum = [&](double theta) {
        SopEstimate cand;
        cand.alpha_hat = 0.35;
        cand.theta_hat = theta;
        auto rec = recover_sop(rx, cand);
        std::vector<cpx> sx(rec.x.samples.begin(), rec.x.samples.begin() + n);
        std::vector<cpx> sy(rec.y.samples.begin(), rec.y.samples.begin() + n);
        dft_inplace(sx, false);
        dft_inplace(sy, false);
        const std::size_t hx = n / (2 * k), qy = n / (4 * k);
        return std::norm(sx[hx]) + std::norm(sx[n - hx]) + std::norm(sy[qy]) +
               std::norm(sy[n - qy]);
    };
    // fit a0 + a1 cos + b1 sin on 8 uniform samples (diagonal normal equations)
    double sy1 = 0, syc = 0, sys = 0;
    for (int i = 0; i < 8; ++i) {
        double th = 2.0 * std::numbers::pi * i / 8.0;
        double y = tone_sum(th);
        sy1 += y;
        syc += y * std::cos(th);
        sys += y * std::sin(th);
    }
    const double a0 = sy1 / 8.0, a1 = syc / 4.0, b1 = sys / 4.0;
    for (int i = 0; i < 360; ++i) {
        double th = 2.0 * std::numbers::pi * i / 360.0;
        double y = tone_sum(th);
        double fit = a0 + a1 * std::cos(th) + b1 * std::sin(th);
        CHECK(std::abs(y - fit) <= 1e-6 * std::abs(a0));
    }
}

TEST_CASE("recover_sop identity, round trip and tone separation") {
    auto p = params32();
    auto seg = preamble_a_segment(p);

    SopEstimate zero;
    zero.alpha_hat = 0.0;
    zero.theta_hat = 2.7;
    CHECK(max_err(recover_sop(seg, zero), seg) < 1e-15);

    auto rx = apply_jones(seg, 0.4, 0.9);
    SopEstimate exact;
    exact.alpha_hat = 0.4;
    exact.theta_hat = 0.9;
    CHECK(max_err(recover_sop(rx, exact), seg) < 1e-9);

    // after recovery, each tone carries >= 99% of its power on its own pol
    auto est = estimate_sop(rx, p);
    auto rec = recover_sop(rx, est);
    auto rec_est = estimate_sop(rec, p);
    const auto& tp = rec_est.tone_powers;  // x_half, x_quarter, y_half, y_quarter
    CHECK(tp[0] / (tp[0] + tp[2]) >= 0.99);
    CHECK(tp[3] / (tp[1] + tp[3]) >= 0.99);
}

TEST_CASE("cdc identity, inverse pair and sign sensitivity") {
    auto p = params32();
    auto seg = preamble_a_segment(p, 512);
    CHECK(max_err(cdc(seg, 0.0), seg) == 0.0);

    auto disp = apply_cd(seg, 20.0);
    CHECK(max_err(cdc(disp, 20.0), seg) < 1e-8);

    auto wrong = cdc(disp, -20.0);
    double err_right = max_err(cdc(disp, 20.0), seg);
    double err_wrong = max_err(wrong, seg);
    CHECK(err_wrong > 100.0 * std::max(err_right, 1e-12));
}

TEST_CASE("estimate_spo measures fractional delay on both polarizations") {
    auto p = params32();
    auto seg = preamble_a_segment(p, 512);
    {
        auto mf = slice(matched_filter(seg, p, p.rrc_span), 256, 256);
        CHECK(std::abs(estimate_spo(mf, p, Pol::X)) <= 1e-3);
        CHECK(std::abs(estimate_spo(mf, p, Pol::Y)) <= 1e-3);
    }
    {
        auto d = apply_frac_delay(seg, 0.2, p.k_os);
        auto mf = slice(matched_filter(d, p, p.rrc_span), 256, 256);
        CHECK(std::abs(estimate_spo(mf, p, Pol::X) - 0.2) <= 0.02);
        CHECK(std::abs(estimate_spo(mf, p, Pol::Y) - 0.2) <= 0.02);
    }
}

TEST_CASE("estimate_spo sweep is monotone and wraps at half a symbol") {
    auto p = params32();
    auto seg = preamble_a_segment(p, 512);
    double prev = -1.0;
    for (double tau = -0.45; tau <= 0.46; tau += 0.05) {
        auto d = apply_frac_delay(seg, tau, p.k_os);
        auto mf = slice(matched_filter(d, p, p.rrc_span), 256, 256);
        const double tx = estimate_spo(mf, p, Pol::X);
        CHECK(std::abs(tx - tau) <= 0.02);
        if (prev > -1.0) CHECK(tx > prev);
        prev = tx;
    }
    // wrap: a delay of exactly +0.5 reads back at one of the +-0.5 edges
    auto d = apply_frac_delay(seg, 0.5, p.k_os);
    auto mf = slice(matched_filter(d, p, p.rrc_span), 256, 256);
    CHECK(std::abs(std::abs(estimate_spo(mf, p, Pol::X)) - 0.5) <= 0.02);
}

namespace {
// closed-form oracle sequence: periodic preamble symbols with an exact
// frequency-offset rotation
std::vector<cpx> synthetic_foe_sequence(double df, double rs, int n, int period) {
    std::vector<cpx> r(n);
    for (int i = 0; i < n; ++i) {
        double tone_ph = (period == 2) ? std::numbers::pi * i : std::numbers::pi * i / 2.0;
        double ph = tone_ph + 2.0 * std::numbers::pi * df * i / rs;
        r[i] = cpx(std::cos(ph), std::sin(ph));
    }
    return r;
}
}  // namespace

TEST_CASE("fine_foe exact on the closed-form sequence") {
    auto p = params32();
    CHECK(std::abs(fine_foe(synthetic_foe_sequence(0.0, p.rs, 128, 2), p, 2)) <= 1e3);
    CHECK(std::abs(fine_foe(synthetic_foe_sequence(100e6, p.rs, 128, 2), p, 2) - 100e6) <= 1e3);
    CHECK(std::abs(fine_foe(synthetic_foe_sequence(-2.5e9, p.rs, 128, 2), p, 2) + 2.5e9) <= 1e3);
    // Y polarization, period 4
    CHECK(std::abs(fine_foe(synthetic_foe_sequence(1.5e9, p.rs, 128, 4), p, 4) - 1.5e9) <= 1e3);
}

TEST_CASE("fine_foe within 10 MHz at 20 dB SNR across +-3 GHz") {
    auto p = params32();
    Rng rng(21);
    const double sigma = std::sqrt(std::pow(10.0, -20.0 / 10.0));
    for (double df : {-3e9, -1.5e9, 0.0, 1.5e9, 3e9}) {
        for (int seed = 0; seed < 3; ++seed) {
            auto r = synthetic_foe_sequence(df, p.rs, 128, 2);
            for (auto& v : r) v += sigma * rng.cgaussian();
            CHECK(std::abs(fine_foe(r, p, 2) - df) <= 10e6);
        }
    }
}

TEST_CASE("coarse then fine estimates are consistent on one realization") {
    auto p = params32();
    ChannelConfig cfg = clean_channel();
    cfg.delta_f = 1.3e9;
    cfg.snr_db = 20.0;
    auto scene = one_burst_scene(p, cfg, 5);
    auto det = detect_frame(scene.stream, p);
    CHECK(std::abs(det.coarse_df_hz - 1.3e9) <= p.fs() / p.n_dft);

    // extract the preamble, compensate the coarse estimate, run fine FOE
    DualPolBurst seg;
    seg.x.fs = seg.y.fs = p.fs();
    const std::size_t n = 256;
    seg.x.samples.assign(scene.stream.x.samples.begin() + det.arrival,
                         scene.stream.x.samples.begin() + det.arrival + n);
    seg.y.samples.assign(scene.stream.y.samples.begin() + det.arrival,
                         scene.stream.y.samples.begin() + det.arrival + n);
    const double step = -2.0 * std::numbers::pi * det.coarse_df_hz / p.fs();
    for (std::size_t i = 0; i < n; ++i) {
        const cpx rot(std::cos(step * i), std::sin(step * i));
        seg.x.samples[i] *= rot;
        seg.y.samples[i] *= rot;
    }
    auto mf = matched_filter(seg, p, p.rrc_span);
    std::vector<cpx> syms;
    for (std::size_t i = 0; i < 128; ++i) syms.push_back(mf.x.samples[2 * i]);
    const double fine = det.coarse_df_hz + fine_foe(syms, p, 2);
    CHECK(std::abs(fine - 1.3e9) <= 10e6);
}
