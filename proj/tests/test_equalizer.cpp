#include <cmath>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"

using namespace cobm;
using namespace cobm::test;

namespace {

// 2-SPS shaped random 16QAM burst for timing tests
DualPolBurst qam_burst_2sps(const DspParams& p, int nsym, uint64_t seed, double snr_db = 0.0) {
    auto grid = QamGrid::qam16();
    Rng rng(seed);
    std::vector<uint8_t> bx(4 * nsym), by(4 * nsym);
    for (auto& b : bx) b = rng.next_u64() & 1;
    for (auto& b : by) b = rng.next_u64() & 1;
    DualPolBurst s{rrc_shape(qam16_map(bx, grid), p, p.rrc_span),
                   rrc_shape(qam16_map(by, grid), p, p.rrc_span)};
    if (snr_db > 0.0) s = add_awgn(s, snr_db, seed + 99);
    return s;
}

std::vector<cpx> random_syms(int n, uint64_t seed) {
    auto grid = QamGrid::qam16();
    Rng rng(seed);
    std::vector<cpx> v(n);
    for (auto& s : v) s = grid.points[rng.next_u64() % 16];
    return v;
}

ChanEstimate identity_taps() {
    ChanEstimate w;
    w.n_bins = 64;
    w.w_xx.assign(64, cpx(1, 0));
    w.w_xy.assign(64, cpx(0, 0));
    w.w_yx.assign(64, cpx(0, 0));
    w.w_yy.assign(64, cpx(1, 0));
    return w;
}

int beats_to_converge(const std::vector<double>& traj, double target, double tol) {
    for (std::size_t b = 0; b < traj.size(); ++b) {
        bool ok = true;
        for (std::size_t j = b; j < traj.size(); ++j)
            if (std::abs(traj[j] - target) >= tol) {
                ok = false;
                break;
            }
        if (ok) return static_cast<int>(b);
    }
    return static_cast<int>(traj.size());
}

}  // namespace

TEST_CASE("timing loop stays put when there is nothing to correct") {
    auto p = params32();
    auto sig = qam_burst_2sps(p, 20000, 1, 20.0);
    LoopConfig loop;
    auto tr = timing_recover(sig, 0.0, loop, p);
    for (double t : tr.tau_trajectory) CHECK(std::abs(t) <= 0.01);
}

TEST_CASE("spo initialization makes the timing loop converge strictly faster") {
    auto p = params32();
    auto clean = qam_burst_2sps(p, 40000, 2, 20.0);
    auto sig = apply_frac_delay(clean, 0.3, p.k_os);
    LoopConfig loop;  // tr_delay_beats = 20

    auto with_init = timing_recover(sig, 0.3, loop, p);
    auto without = timing_recover(sig, std::nullopt, loop, p);
    const int b_with = beats_to_converge(with_init.tau_trajectory, 0.3, 0.05);
    const int b_without = beats_to_converge(without.tau_trajectory, 0.3, 0.05);
    MESSAGE("beats to converge: with init ", b_with, ", without ", b_without);
    CHECK(b_with < b_without);
    CHECK(b_with <= 2);
    // the free-running loop does eventually lock to the right offset
    CHECK(b_without < static_cast<int>(without.tau_trajectory.size()));
}

TEST_CASE("loop disabled with exact init equals a static fractional correction") {
    auto p = params32();
    auto clean = qam_burst_2sps(p, 4000, 3);
    auto sig = apply_frac_delay(clean, 0.23, p.k_os);
    LoopConfig loop;
    loop.timing_loop = false;
    auto tr = timing_recover(sig, 0.23, loop, p);

    // reference: exact frequency-domain inverse delay, then decimation on
    // the same grid
    auto undone = apply_frac_delay(sig, -0.23, p.k_os);
    const int k = static_cast<int>(p.k_os);
    double max_err = 0.0;
    for (std::size_t m = 100; m + 100 < tr.symbols.size(); ++m) {
        const std::size_t pos = static_cast<std::size_t>(tr.input_offset) + m * k;
        max_err = std::max(max_err, std::abs(tr.symbols.x.samples[m] - undone.x.samples[pos]));
    }
    CHECK(max_err < 1e-3);
}

TEST_CASE("equalizer with exact inverse taps is transparent") {
    auto grid = QamGrid::qam16();
    auto in_x = random_syms(12000, 4);
    auto in_y = random_syms(12000, 5);
    LoopConfig loop;
    loop.ddlms = false;
    auto out = mimo_equalize(in_x, in_y, identity_taps(), loop, grid);
    for (std::size_t i = 0; i < in_x.size(); ++i) {
        CHECK(std::abs(out.x[i] - in_x[i]) < 1e-9);
        CHECK(std::abs(out.y[i] - in_y[i]) < 1e-9);
    }
    for (double m : out.mse) CHECK(m <= 1e-6);
}

TEST_CASE("mmse-initialized equalizer tracks no worse than zf-initialized") {
    auto grid = QamGrid::qam16();
    auto tx_blocks = tx_blocks_from_preamble(build_preamble_b());
    // crosstalk channel, moderate noise, same realization for both inits
    const cpx hxx(1.0, 0.05), hxy(0.12, -0.04), hyx(-0.1, 0.08), hyy(0.95, -0.06);
    Rng rng(6);
    const int n = 20000;
    auto tx_x = random_syms(n, 7);
    auto tx_y = random_syms(n, 8);
    const double sigma = std::sqrt(std::pow(10.0, -17.0 / 10.0));
    std::vector<cpx> rx_x(n), rx_y(n);
    for (int i = 0; i < n; ++i) {
        rx_x[i] = hxx * tx_x[i] + hxy * tx_y[i] + sigma * rng.cgaussian();
        rx_y[i] = hyx * tx_x[i] + hyy * tx_y[i] + sigma * rng.cgaussian();
    }
    // estimation blocks through the same channel
    BlockTriple rxb;
    Rng rng2(9);
    for (int i = 0; i < 3; ++i) {
        rxb.x[i].resize(64);
        rxb.y[i].resize(64);
        for (int m = 0; m < 64; ++m) {
            rxb.x[i][m] = hxx * tx_blocks.x[i][m] + hxy * tx_blocks.y[i][m] + sigma * rng2.cgaussian();
            rxb.y[i][m] = hyx * tx_blocks.x[i][m] + hyy * tx_blocks.y[i][m] + sigma * rng2.cgaussian();
        }
    }
    LoopConfig loop;
    auto eq_m = mimo_equalize(rx_x, rx_y, mmse_estimate(rxb, tx_blocks), loop, grid);
    auto eq_z = mimo_equalize(rx_x, rx_y, zf_estimate(rxb, tx_blocks), loop, grid);
    const std::size_t nb = std::min<std::size_t>(60, std::min(eq_m.mse.size(), eq_z.mse.size()));
    double acc_m = 0, acc_z = 0;
    for (std::size_t b = 0; b < nb; ++b) {
        acc_m += eq_m.mse[b];
        acc_z += eq_z.mse[b];
    }
    MESSAGE("first-60-beat MSE: mmse ", acc_m / nb, " zf ", acc_z / nb);
    CHECK(acc_m <= acc_z);
}

TEST_CASE("dd-lms improves on a slightly wrong initialization") {
    auto grid = QamGrid::qam16();
    Rng rng(10);
    const int n = 40000;
    auto tx_x = random_syms(n, 11);
    auto tx_y = random_syms(n, 12);
    const cpx g(0.9, 0.12);  // residual flat error the loop should learn out
    const double sigma = std::sqrt(std::pow(10.0, -20.0 / 10.0));
    std::vector<cpx> rx_x(n), rx_y(n);
    for (int i = 0; i < n; ++i) {
        rx_x[i] = g * tx_x[i] + sigma * rng.cgaussian();
        rx_y[i] = g * tx_y[i] + sigma * rng.cgaussian();
    }
    LoopConfig on;  // eq_delay_beats = 60
    LoopConfig off = on;
    off.ddlms = false;
    auto eq_on = mimo_equalize(rx_x, rx_y, identity_taps(), on, grid);
    auto eq_off = mimo_equalize(rx_x, rx_y, identity_taps(), off, grid);
    // steady state: average the last 100 beats
    double ss_on = 0, ss_off = 0;
    const std::size_t nb = eq_on.mse.size();
    for (std::size_t b = nb - 100; b < nb; ++b) {
        ss_on += eq_on.mse[b];
        ss_off += eq_off.mse[b];
    }
    MESSAGE("steady-state MSE: loop on ", ss_on / 100, " off ", ss_off / 100);
    CHECK(ss_on < ss_off);
}

TEST_CASE("pilot cpr: identity, static rotation, ramp and slip warning") {
    auto grid = QamGrid::qam16();
    FrameLayout layout;
    const int len = 3200;  // 100 pilot blocks
    const int n_pilots = (len + layout.pilot_block - 1) / layout.pilot_block;
    auto pilots_x = gen_pilots(n_pilots, 21, grid);
    auto pilots_y = gen_pilots(n_pilots, 22, grid);
    std::vector<cpx> region_x(len), region_y(len);
    std::vector<cpx> payload_ref_x, payload_ref_y;
    Rng rng(23);
    for (int i = 0; i < len; ++i) {
        if (i % layout.pilot_block == 0) {
            region_x[i] = pilots_x[i / layout.pilot_block];
            region_y[i] = pilots_y[i / layout.pilot_block];
        } else {
            region_x[i] = grid.points[rng.next_u64() % 16];
            region_y[i] = grid.points[rng.next_u64() % 16];
            payload_ref_x.push_back(region_x[i]);
            payload_ref_y.push_back(region_y[i]);
        }
    }

    SUBCASE("zero phase noise is passed through untouched") {
        auto out = pilot_cpr(region_x, region_y, layout, pilots_x, pilots_y);
        REQUIRE(out.payload_x.size() == payload_ref_x.size());
        for (std::size_t i = 0; i < out.payload_x.size(); ++i) {
            CHECK(std::abs(out.payload_x[i] - payload_ref_x[i]) < 1e-12);
            CHECK(std::abs(out.payload_y[i] - payload_ref_y[i]) < 1e-12);
        }
        for (double ph : out.phase_x) CHECK(std::abs(ph) < 1e-12);
        CHECK(out.warnings.empty());
    }

    SUBCASE("static rotation is removed") {
        auto rx = region_x, ry = region_y;
        const cpx rot(std::cos(0.3), std::sin(0.3));
        for (auto& v : rx) v *= rot;
        for (auto& v : ry) v *= rot;
        auto out = pilot_cpr(rx, ry, layout, pilots_x, pilots_y);
        for (std::size_t i = 0; i < out.payload_x.size(); ++i) {
            CHECK(std::abs(out.payload_x[i] - payload_ref_x[i]) < 1e-3);
            CHECK(std::abs(out.payload_y[i] - payload_ref_y[i]) < 1e-3);
        }
    }

    SUBCASE("slow phase ramp is interpolated out") {
        auto rx = region_x, ry = region_y;
        const double slope = 0.004;  // rad per symbol, ~0.13 rad per pilot block
        for (int i = 0; i < len; ++i) {
            const cpx rot(std::cos(slope * i), std::sin(slope * i));
            rx[i] *= rot;
            ry[i] *= rot;
        }
        auto out = pilot_cpr(rx, ry, layout, pilots_x, pilots_y);
        double max_err = 0;
        for (std::size_t i = 0; i < out.payload_x.size(); ++i)
            max_err = std::max(max_err, std::abs(out.payload_x[i] - payload_ref_x[i]));
        CHECK(max_err < 0.02);
        CHECK(out.warnings.empty());
    }

    SUBCASE("an abrupt phase jump raises a cycle-slip warning") {
        auto rx = region_x, ry = region_y;
        const cpx rot(std::cos(2.0), std::sin(2.0));
        for (int i = len / 2; i < len; ++i) {
            rx[i] *= rot;
            ry[i] *= rot;
        }
        auto out = pilot_cpr(rx, ry, layout, pilots_x, pilots_y);
        CHECK(!out.warnings.empty());
    }
}
