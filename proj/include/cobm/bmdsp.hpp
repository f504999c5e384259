// Burst-mode receiver chain: frame detection, coarse/fine FOE, one-tap SOP
// estimation/recovery, feed-forward SPO, Godard timing recovery, CAZAC frame
// synchronization, MMSE/ZF channel estimation, DD-LMS MIMO equalization and
// pilot CPR, plus the composed per-burst pipeline.

#pragma once

#include <array>
#include <optional>
#include <string>

#include "cobm/channel.hpp"
#include "cobm/metrics.hpp"
#include "cobm/preambles.hpp"
#include "cobm/sigcore.hpp"

namespace cobm {

enum class Pol { X, Y };

struct DetectResult {
    std::size_t arrival = 0;   // sample index of the burst start
    double coarse_df_hz = 0.0;
};

// Sliding-window dual-tone search. Throws SyncError("no-burst-found") when no
// window shows the Rs/2 + Rs/4 tone pair above threshold x median bin power.
DetectResult detect_frame(const DualPolBurst& stream, const DspParams& params,
                          int window_symbols = 128, double threshold = 6.0,
                          std::size_t search_from = 0);

struct SopEstimate {
    double alpha_hat = 0.0;
    double theta_hat = 0.0;
    // |R_X,Rs/2|^2, |R_X,Rs/4|^2, |R_Y,Rs/2|^2, |R_Y,Rs/4|^2
    std::array<double, 4> tone_powers{};
};

// One-tap SOP estimation from the Preamble A tone powers. Segment must cover
// the 128 Preamble A symbols at 2 samples/symbol with coarse CFO removed.
SopEstimate estimate_sop(const DualPolBurst& pre_a_rx, const DspParams& params);

// Inverse Jones rotation with the estimated (alpha, theta).
DualPolBurst recover_sop(const DualPolBurst& burst, const SopEstimate& est);

// Receiver-side chromatic dispersion compensation (exact inverse of apply_cd).
DualPolBurst cdc(const DualPolBurst& burst, double fiber_km, double disp_ps_nm_km = 17.0,
                 double lambda_nm = 1550.0);

// Feed-forward SPO from the spectral product of the tone line pair, in
// fractional symbols in (-0.5, 0.5]. The Y path folds in the fixed offset of
// its quarter-rate tone so both polarizations share one convention.
double estimate_spo(const DualPolBurst& pre_a_rx, const DspParams& params, Pol pol);

// Fine FOE from the phase slope across tone periods, Eq.-(8) products at
// lag L refined at longer multiples of L with unwrapping against the
// previous stage. Input is a symbol-rate Preamble A segment for one
// polarization. Unambiguous only for |df| < rs/(2L).
double fine_foe(const std::vector<cpx>& pre_a_symbols, const DspParams& params, int period_l);

struct LoopConfig {
    int beat_symbols = 100;
    int tr_delay_beats = 20;
    int eq_delay_beats = 60;
    double tr_kp = 1e-2;
    double tr_ki = 1e-4;
    double ddlms_mu = 2e-4;
    bool timing_loop = true;
    bool ddlms = true;

    void validate() const {
        if (beat_symbols <= 0 || tr_delay_beats < 0 || eq_delay_beats < 0)
            throw ConfigError("LoopConfig: delays must be >= 0");
        if (tr_kp <= 0 || tr_ki <= 0 || ddlms_mu <= 0)
            throw ConfigError("LoopConfig: gains must be > 0");
    }
};

struct TimingResult {
    DualPolBurst symbols;              // 1 sample/symbol, fs = rs
    std::vector<double> tau_trajectory;  // applied timing estimate per beat
    int input_offset = 0;  // output symbol m sits at input sample input_offset + m*k_os
};

// Godard band-edge TED driving a PI loop updated once per beat with
// tr_delay_beats of loop delay; output interpolated to symbol rate. Output
// symbol m corresponds to input sample m*k_os under the converged timing.
TimingResult timing_recover(const DualPolBurst& burst, std::optional<double> tau_init,
                            const LoopConfig& loop, const DspParams& params);

struct SyncResult {
    int position = -1;      // symbol index of the first Preamble B symbol
    double peak = 0.0;
    double pmnr_db = 0.0;
};

struct FrameSyncOut {
    SyncResult x, y;
    std::vector<double> metric_x, metric_y;  // timing metrics P(n)
};

// Signed-correlation timing metric over the CAZAC triplet. When hint_pos is
// >= 0 the peak search and PMNR floor are restricted to hint_pos +-
// hint_window symbols (the pipeline always has a coarse position from frame
// detection). PMNR excludes +-2*block_len around the peak: the signed
// triplet combination deterministically responds there (single-correlator
// ghosts), which is preamble structure, not noise.
FrameSyncOut frame_sync(const DualPolBurst& symbols_1sps, const PreambleB& pre_b,
                        double pmnr_floor_db = 3.0, int hint_pos = -1, int hint_window = 256);

struct ChanEstimate {
    enum class Method { MMSE, ZF };
    Method method = Method::MMSE;
    int n_bins = 64;
    std::vector<cpx> w_xx, w_xy, w_yx, w_yy;  // one tap per frequency bin
};

// Per-bin DFTs of the three received estimation blocks, plus helpers.
BlockTriple rx_blocks_from_symbols(const DualPolBurst& symbols_1sps, int position, int block_len);

// Closed-form per-bin MMSE solve of the 2x2 normal equations with the
// expectation realized as the average over the three blocks.
ChanEstimate mmse_estimate(const BlockTriple& rx_blocks, const BlockTriple& tx_blocks);

// Per-bin single-tap inversion assuming no residual cross-polarization.
ChanEstimate zf_estimate(const BlockTriple& rx_blocks, const BlockTriple& tx_blocks);

// Empirical MMSE cost of a tap set on estimation blocks (mean over blocks,
// bins and polarizations).
double chanest_residual(const ChanEstimate& w, const BlockTriple& rx_blocks,
                        const BlockTriple& tx_blocks);

struct UniquenessReport {
    std::vector<double> det;            // per-bin determinant (sum form)
    std::vector<bool> unique;           // classification per bin
    bool all_unique = false;
    double max_form_mismatch = 0.0;     // relative disagreement of the two determinant forms
    double max_consistency = 0.0;       // Eq.-(31)-style quantity on bins classified infinite
};

UniquenessReport mmse_uniqueness_check(const BlockTriple& rx_blocks, const BlockTriple& tx_blocks,
                                       double rel_tol = 1e-12);

// Known-pilot reference for phase-aided decisions inside the equalizer.
struct PilotRef {
    std::vector<int> positions;  // region-relative symbol indices
    std::vector<cpx> x, y;       // pilot symbols per polarization
};

struct EqResult {
    std::vector<cpx> x, y;
    std::vector<double> mse;  // per-beat decision MSE
};

// Frequency-domain 64-bin 2x2 equalizer applied by overlap-save; DD-LMS
// gradient accumulated per beat and applied eq_delay_beats later.
EqResult mimo_equalize(const std::vector<cpx>& in_x, const std::vector<cpx>& in_y,
                       const ChanEstimate& init, const LoopConfig& loop, const QamGrid& grid,
                       const PilotRef* pilots = nullptr);

struct CprResult {
    std::vector<cpx> payload_x, payload_y;   // pilots stripped
    std::vector<double> phase_x, phase_y;    // unwrapped phase at each pilot
    std::vector<std::string> warnings;
};

// Pilot-based carrier phase recovery: per-pilot phase, unwrap, linear
// interpolation across each pilot block, conjugate rotation.
CprResult pilot_cpr(const std::vector<cpx>& region_x, const std::vector<cpx>& region_y,
                    const FrameLayout& layout, const std::vector<cpx>& pilots_x,
                    const std::vector<cpx>& pilots_y);

struct RxReport {
    int burst_index = 0;
    std::size_t detect_index = 0;
    double coarse_df_hz = 0.0;
    double fine_df_hz = 0.0;
    SopEstimate sop;
    double tau0 = 0.0;
    SyncResult sync_x, sync_y;
    ChanEstimate chan;
    std::vector<double> mse_trajectory;
    std::vector<double> tau_trajectory;
    BerRecord ber;
    std::vector<std::string> warnings;

    std::string to_json() const;
};

struct RxOptions {
    ChanEstimate::Method method = ChanEstimate::Method::MMSE;
    int detect_window_symbols = 128;
    double detect_threshold = 6.0;
    double pmnr_floor_db = 3.0;
    bool capture = false;  // keep per-stage intermediates for inspection
};

// Per-stage dumps backing the CLI `inspect` command.
struct StageCapture {
    std::vector<double> spec_x_before, spec_y_before;  // Preamble A power spectra
    std::vector<double> spec_x_after, spec_y_after;
    std::vector<double> metric_x, metric_y;
    ChanEstimate taps;
    std::vector<double> mse;
    std::vector<double> tau;
    std::vector<std::size_t> error_positions;
};

// Full Co-BM-DSP chain over every burst in the scene. Stage failures are
// rethrown with the stage name and burst index prepended.
std::vector<RxReport> run_pipeline(const UplinkScene& scene, const DspParams& params,
                                   const LoopConfig& loop, const RxOptions& opts = {},
                                   std::vector<StageCapture>* captures = nullptr);

}  // namespace cobm
