#include "cobm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cobm {

BerRecord ber(const std::vector<uint8_t>& tx_bits, const std::vector<uint8_t>& rx_bits,
              std::size_t first_n) {
    if (tx_bits.size() != rx_bits.size()) throw ShapeError("ber: bit sequence length mismatch");
    BerRecord r;
    r.bits_compared = tx_bits.size();
    std::size_t errors_first = 0;
    const std::size_t nf = std::min(first_n, tx_bits.size());
    for (std::size_t i = 0; i < tx_bits.size(); ++i) {
        if (tx_bits[i] != rx_bits[i]) {
            ++r.bit_errors;
            r.error_positions.push_back(i);
            if (i < nf) ++errors_first;
        }
    }
    r.ber = r.bits_compared ? static_cast<double>(r.bit_errors) / r.bits_compared : 0.0;
    r.ber_first_20k = nf ? static_cast<double>(errors_first) / nf : 0.0;
    return r;
}

double pmnr(const std::vector<double>& metric, std::size_t peak_index, int exclusion) {
    if (metric.size() <= static_cast<std::size_t>(2 * exclusion + 1))
        throw ShapeError("pmnr: metric shorter than the exclusion window");
    if (peak_index >= metric.size()) throw ShapeError("pmnr: peak index out of range");
    double peak = metric[peak_index];
    double floor = 0.0;
    for (std::size_t i = 0; i < metric.size(); ++i) {
        if (std::llabs(static_cast<long long>(i) - static_cast<long long>(peak_index)) <= exclusion)
            continue;
        floor = std::max(floor, metric[i]);
    }
    if (peak <= 0.0 || floor <= 0.0) throw EstimationError("pmnr: undefined metric (flat or zero)");
    return 10.0 * std::log10(peak / floor);
}

double evm_rms(const std::vector<cpx>& rx, const std::vector<cpx>& ref) {
    if (rx.size() != ref.size()) throw ShapeError("evm_rms: length mismatch");
    double err = 0.0, pwr = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        err += std::norm(rx[i] - ref[i]);
        pwr += std::norm(ref[i]);
    }
    return pwr > 0.0 ? std::sqrt(err / pwr) : 0.0;
}

BlockTriple tx_blocks_from_preamble(const PreambleB& pre_b) {
    BlockTriple t;
    const int l = pre_b.block_len;
    for (int i = 0; i < 3; ++i) {
        t.x[i].assign(pre_b.assembled_x.begin() + i * l, pre_b.assembled_x.begin() + (i + 1) * l);
        t.y[i].assign(pre_b.assembled_y.begin() + i * l, pre_b.assembled_y.begin() + (i + 1) * l);
    }
    return t;
}

namespace {

// Deliberately naive DFT: the oracle must not share the receiver's FFT.
std::vector<cpx> naive_dft(const std::vector<cpx>& x) {
    const std::size_t n = x.size();
    std::vector<cpx> out(n, cpx(0, 0));
    for (std::size_t k = 0; k < n; ++k) {
        cpx acc(0, 0);
        for (std::size_t m = 0; m < n; ++m) {
            double ph = -2.0 * std::numbers::pi * static_cast<double>(k * m % n) / n;
            acc += x[m] * cpx(std::cos(ph), std::sin(ph));
        }
        out[k] = acc;
    }
    return out;
}

}  // namespace

LsTaps ls_oracle(const BlockTriple& rx_blocks, const BlockTriple& tx_blocks) {
    const std::size_t n = rx_blocks.x[0].size();
    std::array<std::vector<cpx>, 3> rx, ry, tx, ty;
    for (int i = 0; i < 3; ++i) {
        if (rx_blocks.x[i].size() != n || rx_blocks.y[i].size() != n ||
            tx_blocks.x[i].size() != n || tx_blocks.y[i].size() != n)
            throw ShapeError("ls_oracle: block length mismatch");
        rx[i] = naive_dft(rx_blocks.x[i]);
        ry[i] = naive_dft(rx_blocks.y[i]);
        tx[i] = naive_dft(tx_blocks.x[i]);
        ty[i] = naive_dft(tx_blocks.y[i]);
    }
    LsTaps w;
    w.w_xx.resize(n);
    w.w_xy.resize(n);
    w.w_yx.resize(n);
    w.w_yy.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        // stacked system A w = b with A rows [R_X(k), R_Y(k)] per block;
        // solve (A^H A) w = A^H b explicitly
        cpx axx(0, 0), axy(0, 0), ayy(0, 0);
        cpx bx_x(0, 0), bx_y(0, 0), by_x(0, 0), by_y(0, 0);
        double scale = 0.0;
        for (int i = 0; i < 3; ++i) {
            cpx a0 = rx[i][k], a1 = ry[i][k];
            axx += std::conj(a0) * a0;
            axy += std::conj(a0) * a1;
            ayy += std::conj(a1) * a1;
            bx_x += std::conj(a0) * tx[i][k];
            bx_y += std::conj(a1) * tx[i][k];
            by_x += std::conj(a0) * ty[i][k];
            by_y += std::conj(a1) * ty[i][k];
            scale += std::norm(a0) + std::norm(a1);
        }
        cpx det = axx * ayy - axy * std::conj(axy);
        if (std::abs(det) <= 1e-12 * scale * scale)
            throw EstimationError("ls_oracle: singular system at bin " + std::to_string(k));
        // w = inv([[axx, axy],[axy*, ayy]]) * b, for b per output polarization
        w.w_xx[k] = (ayy * bx_x - axy * bx_y) / det;
        w.w_xy[k] = (axx * bx_y - std::conj(axy) * bx_x) / det;
        w.w_yx[k] = (ayy * by_x - axy * by_y) / det;
        w.w_yy[k] = (axx * by_y - std::conj(axy) * by_x) / det;
    }
    return w;
}

SweepPoint aggregate_sweep(const std::string& variable, double value,
                           const std::vector<uint64_t>& seeds,
                           const std::vector<double>& samples) {
    if (samples.empty()) throw ShapeError("aggregate_sweep: no samples");
    SweepPoint p;
    p.variable = variable;
    p.value = value;
    p.seeds = seeds;
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var = samples.size() > 1 ? var / static_cast<double>(samples.size() - 1) : 0.0;
    p.mean = mean;
    p.half_width95 = 1.96 * std::sqrt(var / static_cast<double>(samples.size()));
    return p;
}

}  // namespace cobm
