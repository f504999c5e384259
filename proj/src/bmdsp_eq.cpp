#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "cobm/bmdsp.hpp"

namespace cobm {

namespace {

constexpr int kInterpTaps = 12;

double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    for (int m = 1; m < 50; ++m) {
        term *= (x / (2.0 * m)) * (x / (2.0 * m));
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}

// Kaiser-windowed sinc taps for a fractional offset mu in [0, 1).
std::array<double, kInterpTaps> interp_taps(double mu) {
    constexpr double beta = 8.0;
    const double i0b = bessel_i0(beta);
    std::array<double, kInterpTaps> h{};
    const int half = kInterpTaps / 2;
    double sum = 0.0;
    for (int j = 0; j < kInterpTaps; ++j) {
        double t = static_cast<double>(j - half + 1) - mu;
        double sinc = (std::abs(t) < 1e-12) ? 1.0
                                            : std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
        double r = t / half;
        double w = (std::abs(r) < 1.0) ? bessel_i0(beta * std::sqrt(1.0 - r * r)) / i0b : 0.0;
        h[j] = sinc * w;
        sum += h[j];
    }
    for (auto& v : h) v /= sum;  // unity DC gain
    return h;
}

cpx interp_at(const std::vector<cpx>& v, long long n0, const std::array<double, kInterpTaps>& h) {
    const int half = kInterpTaps / 2;
    cpx acc(0, 0);
    for (int j = 0; j < kInterpTaps; ++j) {
        long long idx = n0 + j - half + 1;
        if (idx >= 0 && idx < static_cast<long long>(v.size()))
            acc += h[j] * v[static_cast<std::size_t>(idx)];
    }
    return acc;
}

}  // namespace

TimingResult timing_recover(const DualPolBurst& burst, std::optional<double> tau_init,
                            const LoopConfig& loop, const DspParams& params) {
    burst.check();
    loop.validate();
    const int k_os = static_cast<int>(params.k_os);
    if (k_os < 2) throw ConfigError("timing_recover: k_os must be an integer >= 2");
    const std::size_t m_in = burst.size();
    const std::size_t margin = kInterpTaps;
    if (m_in < 4 * margin) throw ShapeError("timing_recover: burst too short");
    const std::size_t n_sym = (m_in - 2 * margin) / k_os;

    double tau_hat = tau_init.value_or(0.0);
    double integ = 0.0;
    std::deque<double> pending;  // correction computed at beat b applies at b + delay

    TimingResult out;
    out.symbols.x.fs = params.rs;
    out.symbols.y.fs = params.rs;
    out.symbols.x.samples.resize(n_sym);
    out.symbols.y.samples.resize(n_sym);
    out.input_offset = static_cast<int>(margin);

    const int beat = loop.beat_symbols;
    const std::size_t n_beats = (n_sym + beat - 1) / beat;

    // TED spectral grid: unpadded 128-point DFTs of the retimed beat at
    // 2 samples/symbol (zero-padding adds a deterministic window phase to
    // the cross products). Only the roll-off skirt |f| in [0.45, 0.55]*Rs is
    // paired with its Rs-shifted image: pairing flat-band bins against
    // out-of-band truncation sidelobes biases the detector.
    constexpr std::size_t kTedN = 128;
    const int ted_lo = static_cast<int>(0.225 * kTedN);
    const int ted_hi = static_cast<int>(0.275 * kTedN);

    for (std::size_t b = 0; b < n_beats; ++b) {
        if (loop.timing_loop && b >= static_cast<std::size_t>(loop.tr_delay_beats) &&
            !pending.empty()) {
            tau_hat += pending.front();
            pending.pop_front();
        }
        if (std::abs(tau_hat) > 4.0)
            throw ConvergenceError("convergence-failure: timing loop diverged");

        const std::size_t m0 = b * beat;
        const std::size_t m1 = std::min(n_sym, m0 + beat);

        const double off = tau_hat * k_os;
        const double floor_off = std::floor(off);
        const long long ioff = static_cast<long long>(floor_off);
        const auto taps = interp_taps(off - floor_off);

        for (std::size_t m = m0; m < m1; ++m) {
            const long long base = static_cast<long long>(margin) +
                                   static_cast<long long>(m) * k_os + ioff;
            out.symbols.x.samples[m] = interp_at(burst.x.samples, base, taps);
            out.symbols.y.samples[m] = interp_at(burst.y.samples, base, taps);
        }

        if (loop.timing_loop) {
            // retimed 2 samples/symbol slices of this beat for the TED; as
            // many full unpadded blocks as the beat provides
            const std::size_t half_step = static_cast<std::size_t>(k_os) / 2;
            cpx c(0, 0);
            const std::size_t beat_syms = m1 - m0;
            const std::size_t n_blk = std::max<std::size_t>(1, 2 * beat_syms / kTedN);
            for (std::size_t blk = 0; blk < n_blk; ++blk) {
                std::vector<cpx> zx(kTedN, cpx(0, 0)), zy(kTedN, cpx(0, 0));
                const std::size_t sym0 = m0 + blk * kTedN / 2;
                for (std::size_t i = 0; 2 * i + 1 < kTedN && sym0 + i < m1; ++i) {
                    const std::size_t m = sym0 + i;
                    const long long base = static_cast<long long>(margin) +
                                           static_cast<long long>(m) * k_os + ioff;
                    zx[2 * i] = out.symbols.x.samples[m];
                    zy[2 * i] = out.symbols.y.samples[m];
                    zx[2 * i + 1] = interp_at(burst.x.samples, base + half_step, taps);
                    zy[2 * i + 1] = interp_at(burst.y.samples, base + half_step, taps);
                }
                dft_inplace(zx, false);
                dft_inplace(zy, false);
                for (int k = ted_lo; k <= ted_hi; ++k) {
                    const std::size_t k2 = (k + kTedN / 2) % kTedN;  // f - Rs image
                    c += zx[static_cast<std::size_t>(k)] * std::conj(zx[k2]);
                    c += zy[static_cast<std::size_t>(k)] * std::conj(zy[k2]);
                }
            }
            // correlation phase is -2*pi*(residual delay in symbols)
            const double e = -std::arg(c) / (2.0 * std::numbers::pi);
            integ += loop.tr_ki * e;
            pending.push_back(loop.tr_kp * e + integ);
        }
        out.tau_trajectory.push_back(tau_hat);
    }
    return out;
}

// --- MIMO equalizer ---------------------------------------------------------

namespace {

struct Kernel128 {
    std::array<std::vector<cpx>, 4> h;  // H128 per tap path: xx, xy, yx, yy
};

// 64-bin taps -> centered 64-tap kernel -> 128-point transfer functions.
Kernel128 build_kernels(const ChanEstimate& w) {
    Kernel128 ker;
    const int n = w.n_bins;
    const std::array<const std::vector<cpx>*, 4> taps{&w.w_xx, &w.w_xy, &w.w_yx, &w.w_yy};
    for (int t = 0; t < 4; ++t) {
        std::vector<cpx> td = idft(*taps[t]);
        std::vector<cpx> k128(2 * n, cpx(0, 0));
        for (int m = 0; m < n / 2; ++m) k128[m] = td[m];                    // delays 0..31
        for (int m = n / 2; m < n; ++m) k128[n + m] = td[m];                // delays -32..-1
        ker.h[t] = dft(k128);
    }
    return ker;
}

int slice16(const cpx& v, const QamGrid& grid) {
    int best = 0;
    double bd = std::norm(v - grid.points[0]);
    for (int l = 1; l < 16; ++l) {
        double d = std::norm(v - grid.points[l]);
        if (d < bd) {
            bd = d;
            best = l;
        }
    }
    return best;
}

}  // namespace

EqResult mimo_equalize(const std::vector<cpx>& in_x, const std::vector<cpx>& in_y,
                       const ChanEstimate& init, const LoopConfig& loop, const QamGrid& grid,
                       const PilotRef* pilots) {
    if (in_x.size() != in_y.size()) throw ShapeError("mimo_equalize: X/Y length mismatch");
    loop.validate();
    const int n = init.n_bins;
    if (!is_pow2(static_cast<std::size_t>(n))) throw ConfigError("mimo_equalize: bins not 2^k");
    const int nb2 = 2 * n;
    const std::size_t len = in_x.size();
    const std::size_t nblocks = (len + n - 1) / n;
    const int beat = loop.beat_symbols;

    ChanEstimate w = init;
    Kernel128 ker = build_kernels(w);

    // padded inputs: 32 leading zeros so slab j covers in[n*j - 32, n*j + 96)
    std::vector<cpx> px(len + nb2, cpx(0, 0)), py(len + nb2, cpx(0, 0));
    std::copy(in_x.begin(), in_x.end(), px.begin() + n / 2);
    std::copy(in_y.begin(), in_y.end(), py.begin() + n / 2);

    EqResult out;
    out.x.resize(len);
    out.y.resize(len);

    // DD-LMS bookkeeping
    struct Grad {
        std::vector<cpx> gxx, gxy, gyx, gyy;
        int count = 0;
    };
    auto fresh_grad = [n]() {
        Grad g;
        g.gxx.assign(n, cpx(0, 0));
        g.gxy.assign(n, cpx(0, 0));
        g.gyx.assign(n, cpx(0, 0));
        g.gyy.assign(n, cpx(0, 0));
        return g;
    };
    Grad acc = fresh_grad();
    int acc_beat = 0;
    std::deque<std::pair<int, Grad>> queue;  // (apply_at_beat, gradient)

    std::vector<double> mse_acc;
    std::vector<int> mse_cnt;
    auto mse_bucket = [&](std::size_t sym) -> std::size_t {
        std::size_t b = sym / beat;
        if (mse_acc.size() <= b) {
            mse_acc.resize(b + 1, 0.0);
            mse_cnt.resize(b + 1, 0);
        }
        return b;
    };

    // pilot-phase tracker for decision derotation
    std::size_t next_pilot = 0;
    double phi_x = 0.0, phi_y = 0.0;
    bool phi_valid = false;

    int divergent_run = 0;

    for (std::size_t j = 0; j < nblocks; ++j) {
        const int b_now = static_cast<int>(j * n / static_cast<std::size_t>(beat));
        if (loop.ddlms) {
            // finalize gradient buckets for beats that have fully passed
            while (acc_beat < b_now) {
                queue.emplace_back(acc_beat + loop.eq_delay_beats, std::move(acc));
                acc = fresh_grad();
                ++acc_beat;
            }
            bool changed = false;
            while (!queue.empty() && queue.front().first <= b_now) {
                const Grad& g = queue.front().second;
                if (g.count > 0) {
                    for (int k = 0; k < n; ++k) {
                        w.w_xx[k] -= loop.ddlms_mu * g.gxx[k];
                        w.w_xy[k] -= loop.ddlms_mu * g.gxy[k];
                        w.w_yx[k] -= loop.ddlms_mu * g.gyx[k];
                        w.w_yy[k] -= loop.ddlms_mu * g.gyy[k];
                    }
                    changed = true;
                }
                queue.pop_front();
            }
            if (changed) ker = build_kernels(w);
        }

        // overlap-save equalization of block j
        std::vector<cpx> sx(px.begin() + j * n, px.begin() + j * n + nb2);
        std::vector<cpx> sy(py.begin() + j * n, py.begin() + j * n + nb2);
        dft_inplace(sx, false);
        dft_inplace(sy, false);
        std::vector<cpx> ox(nb2), oy(nb2);
        for (int k = 0; k < nb2; ++k) {
            ox[k] = ker.h[0][k] * sx[k] + ker.h[1][k] * sy[k];
            oy[k] = ker.h[2][k] * sx[k] + ker.h[3][k] * sy[k];
        }
        dft_inplace(ox, true);
        dft_inplace(oy, true);

        const std::size_t blk_start = j * n;
        const std::size_t blk_len = std::min<std::size_t>(n, len - blk_start);
        std::vector<cpx> err_x(n, cpx(0, 0)), err_y(n, cpx(0, 0));
        for (std::size_t t = 0; t < blk_len; ++t) {
            const std::size_t g = blk_start + t;
            const cpx yx = ox[n / 2 + t];
            const cpx yy = oy[n / 2 + t];
            out.x[g] = yx;
            out.y[g] = yy;

            // known pilots refresh the derotation phase used for decisions
            if (pilots && next_pilot < pilots->positions.size() &&
                static_cast<std::size_t>(pilots->positions[next_pilot]) == g) {
                const double px_meas = std::arg(yx * std::conj(pilots->x[next_pilot]));
                const double py_meas = std::arg(yy * std::conj(pilots->y[next_pilot]));
                if (!phi_valid) {
                    phi_x = px_meas;
                    phi_y = py_meas;
                    phi_valid = true;
                } else {
                    phi_x += 0.5 * std::remainder(px_meas - phi_x, 2.0 * std::numbers::pi);
                    phi_y += 0.5 * std::remainder(py_meas - phi_y, 2.0 * std::numbers::pi);
                }
                ++next_pilot;
            }
            const cpx rot_x = phi_valid ? cpx(std::cos(phi_x), std::sin(phi_x)) : cpx(1, 0);
            const cpx rot_y = phi_valid ? cpx(std::cos(phi_y), std::sin(phi_y)) : cpx(1, 0);
            const cpx dx = grid.points[slice16(yx * std::conj(rot_x), grid)] * rot_x;
            const cpx dy = grid.points[slice16(yy * std::conj(rot_y), grid)] * rot_y;
            err_x[t] = yx - dx;
            err_y[t] = yy - dy;

            const std::size_t mb = mse_bucket(g);
            mse_acc[mb] += 0.5 * (std::norm(err_x[t]) + std::norm(err_y[t]));
            mse_cnt[mb] += 1;
        }

        if (loop.ddlms) {
            std::vector<cpx> rx(in_x.begin() + blk_start, in_x.begin() + blk_start + blk_len);
            std::vector<cpx> ry(in_y.begin() + blk_start, in_y.begin() + blk_start + blk_len);
            rx.resize(n, cpx(0, 0));
            ry.resize(n, cpx(0, 0));
            dft_inplace(rx, false);
            dft_inplace(ry, false);
            dft_inplace(err_x, false);
            dft_inplace(err_y, false);
            for (int k = 0; k < n; ++k) {
                acc.gxx[k] += err_x[k] * std::conj(rx[k]);
                acc.gxy[k] += err_x[k] * std::conj(ry[k]);
                acc.gyx[k] += err_y[k] * std::conj(rx[k]);
                acc.gyy[k] += err_y[k] * std::conj(ry[k]);
            }
            acc.count += 1;
        }
    }

    out.mse.resize(mse_acc.size());
    for (std::size_t b = 0; b < mse_acc.size(); ++b)
        out.mse[b] = mse_cnt[b] ? mse_acc[b] / mse_cnt[b] : 0.0;
    if (!out.mse.empty()) {
        const double ref = std::max(out.mse[0], 1e-12);
        for (double m : out.mse) {
            divergent_run = (m > 10.0 * ref) ? divergent_run + 1 : 0;
            if (divergent_run >= 10)
                throw ConvergenceError("convergence-failure: DD-LMS MSE diverged");
        }
    }
    return out;
}

// --- pilot CPR ----------------------------------------------------------------

CprResult pilot_cpr(const std::vector<cpx>& region_x, const std::vector<cpx>& region_y,
                    const FrameLayout& layout, const std::vector<cpx>& pilots_x,
                    const std::vector<cpx>& pilots_y) {
    if (region_x.size() != region_y.size()) throw ShapeError("pilot_cpr: X/Y length mismatch");
    const std::size_t len = region_x.size();
    CprResult out;

    auto run_pol = [&](const std::vector<cpx>& region, const std::vector<cpx>& pilots,
                       std::vector<double>& phases, std::vector<cpx>& payload, const char* pol) {
        std::vector<std::size_t> pos;
        for (std::size_t p = 0; p * layout.pilot_block < len; ++p)
            pos.push_back(p * layout.pilot_block);
        if (pos.size() > pilots.size()) throw ShapeError("pilot_cpr: not enough pilot symbols");
        phases.resize(pos.size());
        double prev = 0.0;
        for (std::size_t i = 0; i < pos.size(); ++i) {
            double ph = std::arg(region[pos[i]] * std::conj(pilots[i]));
            if (i == 0) {
                phases[i] = ph;
            } else {
                double d = std::remainder(ph - prev, 2.0 * std::numbers::pi);
                if (std::abs(d) > std::numbers::pi / 2.0)
                    out.warnings.push_back(std::string("cycle-slip risk on ") + pol +
                                           " at pilot " + std::to_string(i));
                phases[i] = prev + d;
            }
            prev = phases[i];
        }
        payload.reserve(len - pos.size());
        for (std::size_t nloc = 0; nloc < len; ++nloc) {
            const std::size_t blk = nloc / layout.pilot_block;
            double phi;
            if (blk + 1 < phases.size()) {
                const double t = static_cast<double>(nloc - pos[blk]) /
                                 static_cast<double>(layout.pilot_block);
                phi = phases[blk] + t * (phases[blk + 1] - phases[blk]);
            } else {
                phi = phases.back();
            }
            if (nloc % layout.pilot_block == 0) continue;  // strip pilots
            payload.push_back(region[nloc] * cpx(std::cos(phi), -std::sin(phi)));
        }
    };
    run_pol(region_x, pilots_x, out.phase_x, out.payload_x, "X");
    run_pol(region_y, pilots_y, out.phase_y, out.payload_y, "Y");
    return out;
}

}  // namespace cobm
