#include <algorithm>
#include <cmath>
#include <numbers>

#include "cobm/bmdsp.hpp"

namespace cobm {

namespace {

std::vector<double> power_spectrum_padded(const std::vector<cpx>& seg, std::size_t offset,
                                          std::size_t window, std::size_t n_dft) {
    std::vector<cpx> buf(n_dft, cpx(0, 0));
    for (std::size_t i = 0; i < window && offset + i < seg.size(); ++i) buf[i] = seg[offset + i];
    dft_inplace(buf, false);
    std::vector<double> p(n_dft);
    for (std::size_t k = 0; k < n_dft; ++k) p[k] = std::norm(buf[k]);
    return p;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
}

// Index of the strongest bin within +-w of center (circular).
std::size_t peak_near(const std::vector<double>& p, long long center, int w) {
    const long long n = static_cast<long long>(p.size());
    std::size_t best = static_cast<std::size_t>(((center % n) + n) % n);
    for (long long d = -w; d <= w; ++d) {
        std::size_t k = static_cast<std::size_t>((((center + d) % n) + n) % n);
        if (p[k] > p[best]) best = k;
    }
    return best;
}

}  // namespace

DetectResult detect_frame(const DualPolBurst& stream, const DspParams& params, int window_symbols,
                          double threshold, std::size_t search_from) {
    stream.check();
    params.validate();
    const int k_os = static_cast<int>(params.k_os);
    const std::size_t window = static_cast<std::size_t>(window_symbols) * k_os;
    const std::size_t n_dft = static_cast<std::size_t>(params.n_dft);
    const double fs = params.fs();
    const double bin_hz = fs / static_cast<double>(n_dft);
    // tone spacing Rs/4 in padded-DFT bins
    const long long spacing = std::llround(params.rs / 4.0 / bin_hz);

    const std::size_t n = stream.size();
    if (n < window) throw SyncError("no-burst-found: stream shorter than the search window");

    for (std::size_t pos = search_from; pos + window <= n; pos += window / 2) {
        auto px = power_spectrum_padded(stream.x.samples, pos, window, n_dft);
        auto py = power_spectrum_padded(stream.y.samples, pos, window, n_dft);
        std::vector<double> p(n_dft);
        for (std::size_t k = 0; k < n_dft; ++k) p[k] = px[k] + py[k];

        const double med = median_of(p);
        if (med <= 0.0) continue;

        // candidate pair: bins k and k+spacing, both well above the floor,
        // midpoint within +-Rs/4 of 3Rs/8 (rejects the mirror line pair of
        // the real tones at -3Rs/8 and random noise pairings)
        double best_score = 0.0;
        long long best_k = -1;
        for (std::size_t k = 0; k + spacing < n_dft; ++k) {
            if (p[k] < threshold * med || p[k + spacing] < threshold * med) continue;
            if (p[k] + p[k + spacing] < 4.0 * threshold * med) continue;
            double mid_hz = 0.5 * (bin_freq(static_cast<int>(k), static_cast<int>(n_dft), fs) +
                                   bin_freq(static_cast<int>(k + spacing), static_cast<int>(n_dft), fs));
            if (std::abs(mid_hz - 3.0 * params.rs / 8.0) > params.rs / 4.0) continue;
            double score = (p[k] + p[k + spacing]) /
                           (1.0 + std::abs(mid_hz - 3.0 * params.rs / 8.0) / params.rs);
            if (score > best_score) {
                best_score = score;
                best_k = static_cast<long long>(k);
            }
        }
        if (best_k < 0) continue;

        // refine each tone to the local cluster peak (partial-window tones
        // smear over a few bins)
        const long long k_lo = static_cast<long long>(peak_near(p, best_k, 3));
        const long long k_hi = static_cast<long long>(peak_near(p, best_k + spacing, 3));
        if (std::llabs(k_hi - k_lo - spacing) > 2) continue;
        const double f_lo = bin_freq(static_cast<int>(k_lo), static_cast<int>(n_dft), fs);
        const double f_hi = bin_freq(static_cast<int>(k_hi), static_cast<int>(n_dft), fs);
        const double coarse_df = 0.5 * (f_lo + f_hi) - 3.0 * params.rs / 8.0;

        // Refine the arrival with the lag-8 periodicity of Preamble A
        // (period 4 and 8 samples at 2 samples/symbol, both correlate at 8).
        const std::size_t lag = static_cast<std::size_t>(PreambleA::period_y) * k_os;
        const std::size_t w = window;
        const std::size_t lo = pos > w ? pos - w : 0;
        const std::size_t hi = std::min(n - w - lag, pos + w);
        double cmax = 0.0;
        std::size_t cbest = pos;
        for (std::size_t s = lo; s <= hi; s += 2) {
            cpx acc(0, 0);
            for (std::size_t i = 0; i < w; i += 2) {
                acc += stream.x.samples[s + i] * std::conj(stream.x.samples[s + i + lag]);
                acc += stream.y.samples[s + i] * std::conj(stream.y.samples[s + i + lag]);
            }
            double c = std::abs(acc);
            if (c > cmax) {
                cmax = c;
                cbest = s;
            }
        }
        // window (w + lag long) exceeds Preamble A by `lag`, so the best
        // centered placement starts lag/2 before the true arrival
        std::size_t arrival = cbest + lag / 2;
        return {arrival, coarse_df};
    }
    throw SyncError("no-burst-found: no window contains the two preamble tones");
}

namespace {

struct ToneBins {
    std::vector<std::size_t> x_lines;  // +-Rs/2 at the segment DFT size
    std::vector<std::size_t> y_lines;  // +-Rs/4
    std::size_t n = 0;
};

ToneBins tone_bins(const DspParams& params, std::size_t seg_len) {
    const int k_os = static_cast<int>(params.k_os);
    std::size_t n = 1;
    while (n * 2 <= seg_len && n < static_cast<std::size_t>(PreambleA::length) * k_os) n *= 2;
    ToneBins tb;
    tb.n = n;
    const std::size_t half_rate = n / (2 * k_os);      // Rs/2 in bins
    const std::size_t quarter_rate = n / (4 * k_os);   // Rs/4 in bins
    tb.x_lines = {half_rate, n - half_rate};
    tb.y_lines = {quarter_rate, n - quarter_rate};
    return tb;
}

double band_power(const std::vector<cpx>& spec, std::size_t bin, int w = 1) {
    const long long n = static_cast<long long>(spec.size());
    double acc = 0.0;
    for (long long d = -w; d <= w; ++d)
        acc += std::norm(spec[static_cast<std::size_t>((((static_cast<long long>(bin) + d) % n) + n) % n)]);
    return acc;
}

}  // namespace

SopEstimate estimate_sop(const DualPolBurst& pre_a_rx, const DspParams& params) {
    pre_a_rx.check();
    const ToneBins tb = tone_bins(params, pre_a_rx.size());
    if (tb.n < 16) throw ShapeError("estimate_sop: segment too short");

    std::vector<cpx> sx(pre_a_rx.x.samples.begin(), pre_a_rx.x.samples.begin() + tb.n);
    std::vector<cpx> sy(pre_a_rx.y.samples.begin(), pre_a_rx.y.samples.begin() + tb.n);
    dft_inplace(sx, false);
    dft_inplace(sy, false);

    double p_x_half = 0, p_x_quarter = 0, p_y_half = 0, p_y_quarter = 0;
    for (auto b : tb.x_lines) {
        p_x_half += band_power(sx, b);
        p_y_half += band_power(sy, b);
    }
    for (auto b : tb.y_lines) {
        p_x_quarter += band_power(sx, b);
        p_y_quarter += band_power(sy, b);
    }

    SopEstimate est;
    est.tone_powers = {p_x_half, p_x_quarter, p_y_half, p_y_quarter};

    double total = 0.0;
    for (const auto& v : sx) total += std::norm(v);
    for (const auto& v : sy) total += std::norm(v);
    const double tone_sum = p_x_half + p_x_quarter + p_y_half + p_y_quarter;
    if (total <= 0.0 || tone_sum < 0.05 * total)
        throw EstimationError("estimate_sop: tone power below the noise floor");

    // Eq.-(2) power ratio
    est.alpha_hat = (p_y_half + p_x_quarter) / tone_sum;

    // theta: maximize the recovered on-polarization tone power sum. The
    // objective is exactly a0 + a1*cos(theta) + b1*sin(theta), so a coarse
    // grid pass is followed by the closed-form sinusoid maximum.
    const double c = std::sqrt(1.0 - est.alpha_hat);
    const double s = std::sqrt(est.alpha_hat);
    auto objective = [&](double theta) {
        const cpx ejt(std::cos(theta), std::sin(theta));
        double acc = 0.0;
        for (auto b : tb.x_lines) {
            cpx v = c * sx[b] + s * ejt * sy[b];
            acc += std::norm(v);
        }
        for (auto b : tb.y_lines) {
            cpx v = -s * std::conj(ejt) * sx[b] + c * sy[b];
            acc += std::norm(v);
        }
        return acc;
    };
    double best_theta = 0.0, best_val = -1.0;
    constexpr int kGrid = 1024;
    for (int i = 0; i < kGrid; ++i) {
        double th = 2.0 * std::numbers::pi * i / kGrid;
        double v = objective(th);
        if (v > best_val) {
            best_val = v;
            best_theta = th;
        }
    }
    // exact refinement from three samples of the sinusoid
    const double p0 = objective(0.0);
    const double p1 = objective(2.0 * std::numbers::pi / 3.0);
    const double p2 = objective(4.0 * std::numbers::pi / 3.0);
    const double a1 = (2.0 * p0 - p1 - p2) / 3.0;
    const double b1 = (p1 - p2) / std::sqrt(3.0);
    double theta = std::atan2(b1, a1);
    if (a1 == 0.0 && b1 == 0.0) theta = best_theta;  // flat objective (alpha ~ 0 or 1)
    if (theta < 0) theta += 2.0 * std::numbers::pi;
    est.theta_hat = theta;
    return est;
}

DualPolBurst recover_sop(const DualPolBurst& burst, const SopEstimate& est) {
    burst.check();
    const double c = std::sqrt(1.0 - est.alpha_hat);
    const double s = std::sqrt(est.alpha_hat);
    const cpx ejt(std::cos(est.theta_hat), std::sin(est.theta_hat));
    DualPolBurst out = burst;
    // inverse (Hermitian transpose) of the unitary Jones matrix
    for (std::size_t i = 0; i < burst.size(); ++i) {
        cpx xi = burst.x.samples[i], yi = burst.y.samples[i];
        out.x.samples[i] = c * xi + s * ejt * yi;
        out.y.samples[i] = -s * std::conj(ejt) * xi + c * yi;
    }
    return out;
}

DualPolBurst cdc(const DualPolBurst& burst, double fiber_km, double disp_ps_nm_km,
                 double lambda_nm) {
    // same all-pass transfer as apply_cd with the conjugate phase
    return apply_cd(burst, -fiber_km, disp_ps_nm_km, lambda_nm);
}

double estimate_spo(const DualPolBurst& pre_a_rx, const DspParams& params, Pol pol) {
    pre_a_rx.check();
    const ToneBins tb = tone_bins(params, pre_a_rx.size());
    if (tb.n < 16) throw ShapeError("estimate_spo: segment too short");
    const auto& samples = (pol == Pol::X) ? pre_a_rx.x.samples : pre_a_rx.y.samples;
    std::vector<cpx> spec(samples.begin(), samples.begin() + tb.n);
    dft_inplace(spec, false);

    const auto& lines = (pol == Pol::X) ? tb.x_lines : tb.y_lines;
    const std::size_t bin_pos = lines[0];      // +Rs/2 or +Rs/4
    const std::size_t bin_neg = lines[1];      // mirror line

    double total = 0.0;
    for (const auto& v : spec) total += std::norm(v);
    const double p_pos = band_power(spec, bin_pos), p_neg = band_power(spec, bin_neg);
    if (p_pos < 0.01 * total || p_neg < 0.01 * total)
        throw EstimationError("estimate_spo: tone bins below threshold");

    const cpx prod = spec[bin_neg] * std::conj(spec[bin_pos]);
    double tau;
    if (pol == Pol::X) {
        tau = std::arg(prod) / (2.0 * std::numbers::pi);
    } else {
        // the quarter-rate tone line coefficients contribute a fixed -pi/2;
        // fold it out so both polarizations share one tau convention
        tau = std::arg(prod) / std::numbers::pi + 0.5;
    }
    // wrap to (-0.5, 0.5]
    tau -= std::floor(tau + 0.5);
    if (tau <= -0.5) tau += 1.0;
    return tau;
}

double fine_foe(const std::vector<cpx>& pre_a_symbols, const DspParams& params, int period_l) {
    if (period_l <= 0) throw ConfigError("fine_foe: period must be positive");
    const std::size_t n = pre_a_symbols.size();
    if (n < static_cast<std::size_t>(4 * period_l))
        throw ShapeError("fine_foe: segment shorter than four periods");

    // Eq.-(8) correlation at lag m*L; longer lags sharpen the estimate and
    // are unwrapped against the previous stage.
    auto lag_corr = [&](int lag) {
        cpx acc(0, 0);
        for (std::size_t i = 0; i + lag < n; ++i)
            acc += std::conj(pre_a_symbols[i]) * pre_a_symbols[i + lag];
        return acc;
    };

    double df = 0.0;
    bool first = true;
    for (int lag = period_l; lag <= static_cast<int>(n) / 4; lag *= 4) {
        const cpx q = lag_corr(lag);
        if (std::abs(q) <= 0.0) throw EstimationError("fine_foe: empty correlation");
        const double scale = params.rs / (2.0 * std::numbers::pi * lag);
        if (first) {
            df = scale * std::arg(q);
            first = false;
        } else {
            const double psi_pred = df / scale;
            const double psi =
                psi_pred + std::remainder(std::arg(q) - psi_pred, 2.0 * std::numbers::pi);
            df = scale * psi;
        }
    }
    return df;
}

}  // namespace cobm
