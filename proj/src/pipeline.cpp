#include <cmath>
#include <numbers>

#include "cobm/bmdsp.hpp"
#include "json.hpp"

namespace cobm {

namespace {

DualPolBurst slice_burst(const DualPolBurst& s, std::size_t begin, std::size_t end) {
    end = std::min(end, s.size());
    begin = std::min(begin, end);
    DualPolBurst out;
    out.x.fs = s.x.fs;
    out.y.fs = s.y.fs;
    out.x.samples.assign(s.x.samples.begin() + begin, s.x.samples.begin() + end);
    out.y.samples.assign(s.y.samples.begin() + begin, s.y.samples.begin() + end);
    return out;
}

void derotate(DualPolBurst& b, double df_hz) {
    if (df_hz == 0.0) return;
    const double step = -2.0 * std::numbers::pi * df_hz / b.fs();
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double ph = step * static_cast<double>(i);
        const cpx rot(std::cos(ph), std::sin(ph));
        b.x.samples[i] *= rot;
        b.y.samples[i] *= rot;
    }
}

std::vector<double> power_spectrum(const std::vector<cpx>& v, std::size_t n) {
    std::vector<cpx> buf(v.begin(), v.begin() + std::min(n, v.size()));
    buf.resize(n, cpx(0, 0));
    dft_inplace(buf, false);
    std::vector<double> p(n);
    for (std::size_t k = 0; k < n; ++k) p[k] = std::norm(buf[k]);
    return p;
}

std::vector<cpx> decimate(const std::vector<cpx>& v, std::size_t offset, int step, int count) {
    std::vector<cpx> out;
    out.reserve(count);
    for (int i = 0; i < count && offset + static_cast<std::size_t>(i) * step < v.size(); ++i)
        out.push_back(v[offset + static_cast<std::size_t>(i) * step]);
    return out;
}

}  // namespace

std::vector<RxReport> run_pipeline(const UplinkScene& scene, const DspParams& params,
                                   const LoopConfig& loop, const RxOptions& opts,
                                   std::vector<StageCapture>* captures) {
    params.validate();
    loop.validate();
    scene.stream.check();
    const QamGrid grid = QamGrid::qam16();
    const PreambleB pre_b = build_preamble_b();
    const int k_os = static_cast<int>(params.k_os);

    std::vector<RxReport> reports;
    std::size_t cursor = 0;
    std::string stage = "init";

    for (std::size_t burst = 0; burst < scene.tx.size(); ++burst) {
        const FrameLayout& layout = scene.tx[burst].layout;
        const std::size_t frame_samples = static_cast<std::size_t>(layout.total()) * k_os;
        RxReport rep;
        rep.burst_index = static_cast<int>(burst);
        StageCapture cap;
        try {
            stage = "detect_frame";
            const DetectResult det = detect_frame(scene.stream, params, opts.detect_window_symbols,
                                                  opts.detect_threshold, cursor);
            rep.detect_index = det.arrival;
            rep.coarse_df_hz = det.coarse_df_hz;
            cursor = det.arrival + frame_samples;

            const std::size_t lead = 64;
            const std::size_t begin = det.arrival >= lead ? det.arrival - lead : 0;
            const std::size_t seg_lead = det.arrival - begin;
            DualPolBurst seg = slice_burst(scene.stream, begin, det.arrival + frame_samples + 64);

            stage = "coarse_cfo";
            derotate(seg, det.coarse_df_hz);

            stage = "estimate_sop";
            DualPolBurst pre_a_win =
                slice_burst(seg, seg_lead, seg_lead + static_cast<std::size_t>(PreambleA::length) * k_os);
            rep.sop = estimate_sop(pre_a_win, params);
            if (opts.capture) {
                cap.spec_x_before = power_spectrum(pre_a_win.x.samples, 256);
                cap.spec_y_before = power_spectrum(pre_a_win.y.samples, 256);
            }

            stage = "recover_sop";
            seg = recover_sop(seg, rep.sop);

            stage = "matched_filter";
            seg = matched_filter(seg, params, params.rrc_span);

            stage = "cdc";
            const ChannelConfig& cfg = scene.configs[burst];
            seg = cdc(seg, cfg.fiber_km, cfg.disp_ps_nm_km, cfg.lambda_nm);

            DualPolBurst pre_a_rec =
                slice_burst(seg, seg_lead, seg_lead + static_cast<std::size_t>(PreambleA::length) * k_os);
            if (opts.capture) {
                cap.spec_x_after = power_spectrum(pre_a_rec.x.samples, 256);
                cap.spec_y_after = power_spectrum(pre_a_rec.y.samples, 256);
            }

            stage = "estimate_spo";
            rep.tau0 = estimate_spo(pre_a_rec, params, Pol::X);

            stage = "fine_foe";
            auto pre_a_x_syms = decimate(pre_a_rec.x.samples, 0, k_os, PreambleA::length);
            const double df_res = fine_foe(pre_a_x_syms, params, PreambleA::period_x);
            rep.fine_df_hz = det.coarse_df_hz + df_res;

            stage = "fine_cfo";
            derotate(seg, df_res);

            stage = "timing_recover";
            TimingResult tr = timing_recover(seg, rep.tau0, loop, params);
            rep.tau_trajectory = tr.tau_trajectory;
            if (opts.capture) cap.tau = tr.tau_trajectory;

            stage = "frame_sync";
            // detection pins the frame start to a few samples; search near it
            const int hint =
                static_cast<int>((static_cast<long long>(seg_lead) - tr.input_offset) / k_os) +
                layout.n_pre_a;
            FrameSyncOut sync = frame_sync(tr.symbols, pre_b, opts.pmnr_floor_db, hint, 256);
            rep.sync_x = sync.x;
            rep.sync_y = sync.y;
            if (std::abs(sync.x.position - sync.y.position) > 1)
                rep.warnings.push_back("frame_sync: X/Y positions differ by more than 1 symbol");
            const int pos = (sync.x.peak >= sync.y.peak) ? sync.x.position : sync.y.position;
            if (opts.capture) {
                cap.metric_x = sync.metric_x;
                cap.metric_y = sync.metric_y;
            }

            stage = "channel_estimate";
            const BlockTriple rx_blocks = rx_blocks_from_symbols(tr.symbols, pos, pre_b.block_len);
            const BlockTriple tx_blocks = tx_blocks_from_preamble(pre_b);
            rep.chan = (opts.method == ChanEstimate::Method::MMSE)
                           ? mmse_estimate(rx_blocks, tx_blocks)
                           : zf_estimate(rx_blocks, tx_blocks);
            if (opts.capture) cap.taps = rep.chan;

            stage = "mimo_equalize";
            const std::size_t region_start = static_cast<std::size_t>(pos) + layout.n_pre_b;
            const std::size_t region_len = static_cast<std::size_t>(layout.payload_region());
            if (region_start + region_len > tr.symbols.size())
                throw ShapeError("payload region extends past the recovered stream");
            std::vector<cpx> reg_x(tr.symbols.x.samples.begin() + region_start,
                                   tr.symbols.x.samples.begin() + region_start + region_len);
            std::vector<cpx> reg_y(tr.symbols.y.samples.begin() + region_start,
                                   tr.symbols.y.samples.begin() + region_start + region_len);
            const auto pilots_x = gen_pilots(layout.n_pilot, scene.tx[burst].pilot_seed, grid);
            const auto pilots_y = gen_pilots(layout.n_pilot, scene.tx[burst].pilot_seed + 1, grid);
            PilotRef pref;
            pref.positions = layout.pilot_positions();
            for (auto& p : pref.positions) p -= layout.payload_start();
            pref.x = pilots_x;
            pref.y = pilots_y;
            EqResult eq = mimo_equalize(reg_x, reg_y, rep.chan, loop, grid, &pref);
            rep.mse_trajectory = eq.mse;
            if (opts.capture) cap.mse = eq.mse;

            stage = "pilot_cpr";
            CprResult cpr = pilot_cpr(eq.x, eq.y, layout, pilots_x, pilots_y);
            for (const auto& w : cpr.warnings) rep.warnings.push_back(w);

            stage = "qam16_demap";
            const auto bits_x = qam16_demap(cpr.payload_x, grid);
            const auto bits_y = qam16_demap(cpr.payload_y, grid);

            stage = "ber";
            // symbol-interleaved bit stream: 4 X bits then 4 Y bits per index
            const std::size_t nsym = static_cast<std::size_t>(layout.n_payload);
            std::vector<uint8_t> tx_stream(8 * nsym), rx_stream(8 * nsym);
            for (std::size_t s = 0; s < nsym; ++s) {
                for (int b = 0; b < 4; ++b) {
                    tx_stream[8 * s + b] = scene.tx[burst].bits_x[4 * s + b];
                    tx_stream[8 * s + 4 + b] = scene.tx[burst].bits_y[4 * s + b];
                    rx_stream[8 * s + b] = bits_x[4 * s + b];
                    rx_stream[8 * s + 4 + b] = bits_y[4 * s + b];
                }
            }
            rep.ber = ber(tx_stream, rx_stream, 20000);
            if (opts.capture) cap.error_positions = rep.ber.error_positions;
        } catch (const DspError& e) {
            throw DspError("burst " + std::to_string(burst) + " stage " + stage + ": " + e.what());
        }
        reports.push_back(std::move(rep));
        if (captures) captures->push_back(std::move(cap));
    }
    return reports;
}

std::string RxReport::to_json() const {
    nlohmann::json j;
    j["burst_index"] = burst_index;
    j["detect_index"] = detect_index;
    j["coarse_df_hz"] = coarse_df_hz;
    j["fine_df_hz"] = fine_df_hz;
    j["sop"] = {{"alpha_hat", sop.alpha_hat},
                {"theta_hat", sop.theta_hat},
                {"tone_powers", sop.tone_powers}};
    j["tau0"] = tau0;
    j["sync_x"] = {{"position", sync_x.position}, {"peak", sync_x.peak}, {"pmnr_db", sync_x.pmnr_db}};
    j["sync_y"] = {{"position", sync_y.position}, {"peak", sync_y.peak}, {"pmnr_db", sync_y.pmnr_db}};
    auto taps_json = [](const std::vector<cpx>& w) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& v : w) a.push_back({v.real(), v.imag()});
        return a;
    };
    j["chan"] = {{"method", chan.method == ChanEstimate::Method::MMSE ? "mmse" : "zf"},
                 {"n_bins", chan.n_bins},
                 {"w_xx", taps_json(chan.w_xx)},
                 {"w_xy", taps_json(chan.w_xy)},
                 {"w_yx", taps_json(chan.w_yx)},
                 {"w_yy", taps_json(chan.w_yy)}};
    j["mse_trajectory"] = mse_trajectory;
    j["tau_trajectory"] = tau_trajectory;
    j["ber"] = {{"bits_compared", ber.bits_compared},
                {"bit_errors", ber.bit_errors},
                {"ber", ber.ber},
                {"ber_first_20k", ber.ber_first_20k},
                {"error_positions", ber.error_positions}};
    j["warnings"] = warnings;
    return j.dump(2);
}

}  // namespace cobm
