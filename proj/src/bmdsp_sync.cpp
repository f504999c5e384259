#include <algorithm>
#include <cmath>
#include <numbers>

#include "cobm/bmdsp.hpp"

namespace cobm {

namespace {

// Correlation value of Eq. (9): normalized by the windowed received power.
std::vector<cpx> corr_metric(const std::vector<cpx>& r, const std::vector<cpx>& b) {
    const std::size_t n = r.size(), l = b.size();
    if (n < l) return {};
    std::vector<double> pow_prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) pow_prefix[i + 1] = pow_prefix[i] + std::norm(r[i]);
    std::vector<cpx> m(n - l + 1);
    for (std::size_t p = 0; p + l <= n; ++p) {
        cpx acc(0, 0);
        for (std::size_t i = 0; i < l; ++i) acc += r[p + i] * std::conj(b[i]);
        const double win = pow_prefix[p + l] - pow_prefix[p];
        m[p] = (win > 0.0) ? 2.0 * acc / win : cpx(0, 0);
    }
    return m;
}

std::vector<double> timing_metric(const std::vector<cpx>& m, const std::array<int, 3>& signs,
                                  int l) {
    if (m.size() < static_cast<std::size_t>(2 * l) + 1) return {};
    const std::size_t n = m.size() - 2 * l;
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
        cpx acc = static_cast<double>(signs[0]) * m[i] + static_cast<double>(signs[1]) * m[i + l] +
                  static_cast<double>(signs[2]) * m[i + 2 * l];
        p[i] = std::norm(acc);
    }
    return p;
}

SyncResult pick_peak(const std::vector<double>& p, double floor_db, const char* pol,
                     int hint_pos, int hint_window, int block_len) {
    if (p.empty()) throw SyncError(std::string("sync-failure: empty metric on ") + pol);
    std::size_t lo = 0, hi = p.size();
    if (hint_pos >= 0) {
        lo = static_cast<std::size_t>(std::max(0, hint_pos - hint_window));
        hi = std::min(p.size(), static_cast<std::size_t>(hint_pos + hint_window + 1));
        if (lo >= hi) throw SyncError(std::string("sync-failure: hint outside metric on ") + pol);
    }
    std::size_t best = lo;
    for (std::size_t i = lo; i < hi; ++i)
        if (p[i] > p[best]) best = i;
    SyncResult r;
    r.position = static_cast<int>(best);
    r.peak = p[best];
    std::vector<double> window(p.begin() + lo, p.begin() + hi);
    r.pmnr_db = pmnr(window, best - lo, 2 * block_len);
    if (r.pmnr_db < floor_db)
        throw SyncError(std::string("sync-failure: PMNR below floor on ") + pol);
    return r;
}

}  // namespace

FrameSyncOut frame_sync(const DualPolBurst& symbols_1sps, const PreambleB& pre_b,
                        double pmnr_floor_db, int hint_pos, int hint_window) {
    symbols_1sps.check();
    FrameSyncOut out;
    auto mx = corr_metric(symbols_1sps.x.samples, pre_b.bx);
    auto my = corr_metric(symbols_1sps.y.samples, pre_b.by);
    out.metric_x = timing_metric(mx, pre_b.sign_x, pre_b.block_len);
    out.metric_y = timing_metric(my, pre_b.sign_y, pre_b.block_len);
    out.x = pick_peak(out.metric_x, pmnr_floor_db, "X", hint_pos, hint_window, pre_b.block_len);
    out.y = pick_peak(out.metric_y, pmnr_floor_db, "Y", hint_pos, hint_window, pre_b.block_len);
    return out;
}

BlockTriple rx_blocks_from_symbols(const DualPolBurst& symbols_1sps, int position, int block_len) {
    symbols_1sps.check();
    if (position < 0 ||
        static_cast<std::size_t>(position) + 3 * block_len > symbols_1sps.size())
        throw ShapeError("rx_blocks_from_symbols: estimation blocks out of range");
    BlockTriple t;
    for (int i = 0; i < 3; ++i) {
        auto x0 = symbols_1sps.x.samples.begin() + position + i * block_len;
        auto y0 = symbols_1sps.y.samples.begin() + position + i * block_len;
        t.x[i].assign(x0, x0 + block_len);
        t.y[i].assign(y0, y0 + block_len);
    }
    return t;
}

namespace {

struct BinSums {
    // per-bin sums over the three blocks (the Eq.-(25)/(26) expectations up
    // to the common 1/3)
    std::vector<cpx> rxx, ryy, ryx_conj;            // sum R_X R_X*, R_Y R_Y*, R_Y R_X*
    std::vector<cpx> tx_rx, tx_ry, ty_rx, ty_ry;    // sum T R*
    std::array<std::vector<cpx>, 3> fx, fy, ftx, fty;  // per-block spectra
    std::size_t n = 0;
};

BinSums bin_sums(const BlockTriple& rx_blocks, const BlockTriple& tx_blocks) {
    BinSums s;
    s.n = rx_blocks.x[0].size();
    if (!is_pow2(s.n)) throw ShapeError("channel estimation: block length must be a power of two");
    for (int i = 0; i < 3; ++i) {
        if (rx_blocks.x[i].size() != s.n || rx_blocks.y[i].size() != s.n ||
            tx_blocks.x[i].size() != s.n || tx_blocks.y[i].size() != s.n)
            throw ShapeError("channel estimation: block length mismatch");
        s.fx[i] = dft(rx_blocks.x[i]);
        s.fy[i] = dft(rx_blocks.y[i]);
        s.ftx[i] = dft(tx_blocks.x[i]);
        s.fty[i] = dft(tx_blocks.y[i]);
    }
    s.rxx.assign(s.n, cpx(0, 0));
    s.ryy.assign(s.n, cpx(0, 0));
    s.ryx_conj.assign(s.n, cpx(0, 0));
    s.tx_rx.assign(s.n, cpx(0, 0));
    s.tx_ry.assign(s.n, cpx(0, 0));
    s.ty_rx.assign(s.n, cpx(0, 0));
    s.ty_ry.assign(s.n, cpx(0, 0));
    for (int i = 0; i < 3; ++i) {
        for (std::size_t k = 0; k < s.n; ++k) {
            const cpx rx = s.fx[i][k], ry = s.fy[i][k];
            const cpx tx = s.ftx[i][k], ty = s.fty[i][k];
            s.rxx[k] += rx * std::conj(rx);
            s.ryy[k] += ry * std::conj(ry);
            s.ryx_conj[k] += ry * std::conj(rx);
            s.tx_rx[k] += tx * std::conj(rx);
            s.tx_ry[k] += tx * std::conj(ry);
            s.ty_rx[k] += ty * std::conj(rx);
            s.ty_ry[k] += ty * std::conj(ry);
        }
    }
    return s;
}

}  // namespace

ChanEstimate mmse_estimate(const BlockTriple& rx_blocks, const BlockTriple& tx_blocks) {
    const BinSums s = bin_sums(rx_blocks, tx_blocks);
    ChanEstimate w;
    w.method = ChanEstimate::Method::MMSE;
    w.n_bins = static_cast<int>(s.n);
    w.w_xx.resize(s.n);
    w.w_xy.resize(s.n);
    w.w_yx.resize(s.n);
    w.w_yy.resize(s.n);
    for (std::size_t k = 0; k < s.n; ++k) {
        const cpx rxx = s.rxx[k], ryy = s.ryy[k];
        const cpx ryx = s.ryx_conj[k];                 // sum R_Y R_X*
        const cpx rxy = std::conj(s.ryx_conj[k]);      // sum R_X R_Y*
        const cpx det = rxx * ryy - rxy * ryx;
        const double scale = 0.5 * (rxx.real() + ryy.real());
        if (std::abs(det) <= 1e-12 * scale * scale)
            throw EstimationError("singular-estimate at bin " + std::to_string(k));
        // Eqs. (16)-(17) and (20)-(21); the 1/3 of the expectation cancels
        w.w_xx[k] = (s.tx_rx[k] * ryy - s.tx_ry[k] * ryx) / det;
        w.w_xy[k] = (s.tx_ry[k] * rxx - s.tx_rx[k] * rxy) / det;
        w.w_yx[k] = (s.ty_rx[k] * ryy - s.ty_ry[k] * ryx) / det;
        w.w_yy[k] = (s.ty_ry[k] * rxx - s.ty_rx[k] * rxy) / det;
    }
    return w;
}

ChanEstimate zf_estimate(const BlockTriple& rx_blocks, const BlockTriple& tx_blocks) {
    const BinSums s = bin_sums(rx_blocks, tx_blocks);
    ChanEstimate w;
    w.method = ChanEstimate::Method::ZF;
    w.n_bins = static_cast<int>(s.n);
    w.w_xx.assign(s.n, cpx(0, 0));
    w.w_xy.assign(s.n, cpx(0, 0));
    w.w_yx.assign(s.n, cpx(0, 0));
    w.w_yy.assign(s.n, cpx(0, 0));
    for (int i = 0; i < 3; ++i) {
        double scale_x = 0.0, scale_y = 0.0;
        for (std::size_t k = 0; k < s.n; ++k) {
            scale_x += std::abs(s.fx[i][k]);
            scale_y += std::abs(s.fy[i][k]);
        }
        scale_x /= static_cast<double>(s.n);
        scale_y /= static_cast<double>(s.n);
        for (std::size_t k = 0; k < s.n; ++k) {
            if (std::abs(s.fx[i][k]) < 1e-9 * scale_x || std::abs(s.fy[i][k]) < 1e-9 * scale_y)
                throw EstimationError("division-guard at bin " + std::to_string(k));
            w.w_xx[k] += s.ftx[i][k] / s.fx[i][k] / 3.0;
            w.w_yy[k] += s.fty[i][k] / s.fy[i][k] / 3.0;
        }
    }
    return w;
}

double chanest_residual(const ChanEstimate& w, const BlockTriple& rx_blocks,
                        const BlockTriple& tx_blocks) {
    const BinSums s = bin_sums(rx_blocks, tx_blocks);
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) {
        for (std::size_t k = 0; k < s.n; ++k) {
            acc += std::norm(w.w_xx[k] * s.fx[i][k] + w.w_xy[k] * s.fy[i][k] - s.ftx[i][k]);
            acc += std::norm(w.w_yx[k] * s.fx[i][k] + w.w_yy[k] * s.fy[i][k] - s.fty[i][k]);
        }
    }
    return acc / (6.0 * static_cast<double>(s.n));
}

UniquenessReport mmse_uniqueness_check(const BlockTriple& rx_blocks, const BlockTriple& tx_blocks,
                                       double rel_tol) {
    const BinSums s = bin_sums(rx_blocks, tx_blocks);
    UniquenessReport rep;
    rep.det.resize(s.n);
    rep.unique.resize(s.n);
    rep.all_unique = true;
    for (std::size_t k = 0; k < s.n; ++k) {
        const double det_a =
            (s.rxx[k] * s.ryy[k] - std::conj(s.ryx_conj[k]) * s.ryx_conj[k]).real();
        // Eq.-(29) expansion: sum of squared pairwise cross terms
        double det_b = 0.0;
        for (int i = 0; i < 3; ++i) {
            for (int j = i + 1; j < 3; ++j) {
                det_b += std::norm(s.fx[i][k] * s.fy[j][k] - s.fy[i][k] * s.fx[j][k]);
            }
        }
        const double scale = 0.5 * (s.rxx[k].real() + s.ryy[k].real());
        const double mismatch = std::abs(det_a - det_b) / std::max(scale * scale, 1e-300);
        rep.max_form_mismatch = std::max(rep.max_form_mismatch, mismatch);
        if (mismatch > 1e-9)
            throw DspError("internal-consistency: determinant forms disagree at bin " +
                           std::to_string(k));
        rep.det[k] = det_a;
        const bool unique = det_a > rel_tol * scale * scale;
        rep.unique[k] = unique;
        if (!unique) {
            rep.all_unique = false;
            // Eq.-(31) consistency quantity must vanish for the infinite-
            // solution classification to be sound (both output polarizations)
            const cpx qx = s.rxx[k] * s.tx_ry[k] - s.tx_rx[k] * std::conj(s.ryx_conj[k]);
            const cpx qy = s.rxx[k] * s.ty_ry[k] - s.ty_rx[k] * std::conj(s.ryx_conj[k]);
            double t_scale = 0.0;
            for (int i = 0; i < 3; ++i)
                t_scale += std::norm(s.ftx[i][k]) + std::norm(s.fty[i][k]);
            const double norm = std::max(scale * std::sqrt(scale * t_scale), 1e-300);
            rep.max_consistency =
                std::max(rep.max_consistency, std::max(std::abs(qx), std::abs(qy)) / norm);
        }
    }
    return rep;
}

}  // namespace cobm
