#include "cobm/sigcore.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

namespace cobm {

void DspParams::validate() const {
    if (rs <= 0) throw ConfigError("DspParams: rs must be > 0");
    if (k_os < 2) throw ConfigError("DspParams: k_os must be >= 2");
    if (n_dft <= 0 || !is_pow2(static_cast<std::size_t>(n_dft)))
        throw ConfigError("DspParams: n_dft must be a power of two");
    if (rolloff <= 0 || rolloff >= 1) throw ConfigError("DspParams: rolloff must be in (0, 1)");
}

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// --- DFT ------------------------------------------------------------------

namespace {

const std::vector<cpx>& twiddle_table(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, std::vector<cpx>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<cpx> tw(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
        double ph = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        tw[k] = cpx(std::cos(ph), std::sin(ph));
    }
    return cache.emplace(n, std::move(tw)).first->second;
}

}  // namespace

void dft_inplace(std::vector<cpx>& a, bool inverse) {
    const std::size_t n = a.size();
    if (!is_pow2(n)) throw ShapeError("dft: length must be a power of two");
    if (n <= 1) return;

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    const auto& tw = twiddle_table(n);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t step = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                cpx w = tw[k * step];
                if (inverse) w = std::conj(w);
                cpx u = a[i + k];
                cpx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
    if (inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (auto& z : a) z *= scale;
    }
}

std::vector<cpx> dft(const std::vector<cpx>& block) {
    std::vector<cpx> out = block;
    dft_inplace(out, false);
    return out;
}

std::vector<cpx> idft(const std::vector<cpx>& block) {
    std::vector<cpx> out = block;
    dft_inplace(out, true);
    return out;
}

double bin_freq(int k, int n, double fs) {
    int kk = (k < n / 2) ? k : k - n;
    return static_cast<double>(kk) * fs / static_cast<double>(n);
}

// --- 16QAM ------------------------------------------------------------------

QamGrid QamGrid::qam16() {
    QamGrid g;
    g.order = 16;
    g.points.resize(16);
    // Gray on each rail: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
    static const double rail[4] = {-3.0, -1.0, +1.0, +3.0};
    static const int gray[4] = {0, 1, 3, 2};  // rail index -> 2-bit code
    const double norm = 1.0 / std::sqrt(10.0);
    for (int i = 0; i < 4; ++i) {
        for (int q = 0; q < 4; ++q) {
            int label = (gray[i] << 2) | gray[q];
            g.points[label] = cpx(rail[i] * norm, rail[q] * norm);
        }
    }
    return g;
}

std::vector<cpx> qam16_map(const std::vector<uint8_t>& bits, const QamGrid& grid) {
    if (bits.size() % 4 != 0) throw ShapeError("qam16_map: bit count not divisible by 4");
    std::vector<cpx> out(bits.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int label = (bits[4 * i] << 3) | (bits[4 * i + 1] << 2) | (bits[4 * i + 2] << 1) |
                    bits[4 * i + 3];
        out[i] = grid.points[label];
    }
    return out;
}

std::vector<uint8_t> qam16_demap(const std::vector<cpx>& symbols, const QamGrid& grid) {
    std::vector<uint8_t> out;
    out.reserve(symbols.size() * 4);
    for (const cpx& s : symbols) {
        int best = 0;
        double best_d = std::norm(s - grid.points[0]);
        for (int l = 1; l < 16; ++l) {
            double d = std::norm(s - grid.points[l]);
            if (d < best_d) {  // ties break toward the smaller label
                best_d = d;
                best = l;
            }
        }
        out.push_back(static_cast<uint8_t>((best >> 3) & 1));
        out.push_back(static_cast<uint8_t>((best >> 2) & 1));
        out.push_back(static_cast<uint8_t>((best >> 1) & 1));
        out.push_back(static_cast<uint8_t>(best & 1));
    }
    return out;
}

// --- RRC ----------------------------------------------------------------------

std::vector<double> rrc_taps(const DspParams& params, int span) {
    if (span < 16 || span % 2 != 0) throw ConfigError("rrc_taps: span must be even and >= 16");
    const int k = static_cast<int>(params.k_os);
    if (k < 2 || params.k_os != static_cast<double>(k))
        throw ConfigError("rrc_taps: k_os must be an integer >= 2 for shaping");
    const double beta = params.rolloff;
    const int ntaps = span * k + 1;
    const int half = ntaps / 2;
    std::vector<double> h(ntaps);
    for (int i = 0; i < ntaps; ++i) {
        double t = static_cast<double>(i - half) / k;  // time in symbols
        double v;
        if (std::abs(t) < 1e-12) {
            v = 1.0 - beta + 4.0 * beta / std::numbers::pi;
        } else if (std::abs(std::abs(4.0 * beta * t) - 1.0) < 1e-9) {
            v = beta / std::sqrt(2.0) *
                ((1 + 2 / std::numbers::pi) * std::sin(std::numbers::pi / (4 * beta)) +
                 (1 - 2 / std::numbers::pi) * std::cos(std::numbers::pi / (4 * beta)));
        } else {
            double pit = std::numbers::pi * t;
            double fourbt = 4.0 * beta * t;
            v = (std::sin(pit * (1 - beta)) + fourbt * std::cos(pit * (1 + beta))) /
                (pit * (1 - fourbt * fourbt));
        }
        h[i] = v;
    }
    // Plain truncation at span 32 keeps every Nyquist ISI tap of the matched
    // pair below 1e-2 of the center; tapered windows widen the combined
    // response enough to break that.
    // sum h^2 = k_os
    double e = std::inner_product(h.begin(), h.end(), h.begin(), 0.0);
    double scale = std::sqrt(static_cast<double>(k) / e);
    for (auto& v : h) v *= scale;
    return h;
}

std::vector<cpx> convolve_same(const std::vector<cpx>& x, const std::vector<double>& h) {
    const std::size_t n = x.size(), m = h.size();
    const std::size_t half = m / 2;
    std::vector<cpx> y(n, cpx(0, 0));
    for (std::size_t i = 0; i < n; ++i) {
        // y[i] = sum_j x[i + half - j] * h[j]
        const std::size_t j_lo = (i + half >= n) ? i + half - (n - 1) : 0;
        const std::size_t j_hi = std::min(m - 1, i + half);
        cpx acc(0, 0);
        for (std::size_t j = j_lo; j <= j_hi; ++j) acc += x[i + half - j] * h[j];
        y[i] = acc;
    }
    return y;
}

PolStream rrc_shape(const std::vector<cpx>& symbols, const DspParams& params, int span) {
    const int k = static_cast<int>(params.k_os);
    auto h = rrc_taps(params, span);
    std::vector<cpx> up(symbols.size() * k, cpx(0, 0));
    for (std::size_t i = 0; i < symbols.size(); ++i) up[i * k] = symbols[i];
    PolStream out;
    out.fs = params.fs();
    out.samples = convolve_same(up, h);
    return out;
}

PolStream matched_filter(const PolStream& stream, const DspParams& params, int span) {
    auto h = rrc_taps(params, span);
    const double inv_k = 1.0 / params.k_os;
    for (auto& v : h) v *= inv_k;
    PolStream out;
    out.fs = stream.fs;
    out.samples = convolve_same(stream.samples, h);
    return out;
}

DualPolBurst matched_filter(const DualPolBurst& burst, const DspParams& params, int span) {
    return {matched_filter(burst.x, params, span), matched_filter(burst.y, params, span)};
}

// --- resampling -----------------------------------------------------------------

namespace {

// p/q from the rate ratio, denominators up to 64.
std::pair<int, int> rational_ratio(double fs_in, double fs_out) {
    for (int q = 1; q <= 64; ++q) {
        double p = fs_out * q / fs_in;
        double pr = std::round(p);
        if (pr >= 1 && pr <= 64 && std::abs(p - pr) < 1e-9 * pr)
            return {static_cast<int>(pr), q};
    }
    throw ConfigError("resample: rate ratio not expressible as p/q with p, q <= 64");
}

}  // namespace

PolStream resample(const PolStream& stream, double new_fs) {
    if (stream.fs <= 0 || new_fs <= 0) throw ConfigError("resample: rates must be > 0");
    auto [p, q] = rational_ratio(stream.fs, new_fs);
    if (p == q) {
        PolStream out = stream;
        out.fs = new_fs;
        return out;
    }
    const int g = std::gcd(p, q);
    p /= g;
    q /= g;

    // Kaiser lowpass prototype at the upsampled rate fs*p, cutoff at
    // 0.5*min(fs, new_fs). Long enough for +-0.1 dB flatness to 0.4*min.
    const int taps_per_phase = 48;
    const int ntaps = taps_per_phase * p + 1;
    const int half = ntaps / 2;
    // cutoff in cycles/sample at the virtual rate fs*p: min(fs, new_fs)/2 / (fs*p)
    const double fcut = 0.5 * std::min(1.0, static_cast<double>(p) / q) / p;
    const double kaiser_beta = 10.0;
    auto bessel_i0 = [](double x) {
        double sum = 1.0, term = 1.0;
        for (int m = 1; m < 50; ++m) {
            term *= (x / (2.0 * m)) * (x / (2.0 * m));
            sum += term;
            if (term < 1e-18 * sum) break;
        }
        return sum;
    };
    std::vector<double> h(ntaps);
    const double i0b = bessel_i0(kaiser_beta);
    for (int i = 0; i < ntaps; ++i) {
        double t = static_cast<double>(i - half);
        double sinc = (std::abs(t) < 1e-12)
                          ? 2.0 * fcut
                          : std::sin(2.0 * std::numbers::pi * fcut * t) / (std::numbers::pi * t);
        double r = t / half;
        h[i] = sinc * bessel_i0(kaiser_beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
    }
    for (auto& v : h) v *= p;  // keep passband gain 1 after upsampling by p

    const std::size_t n_in = stream.samples.size();
    const std::size_t n_out = (n_in * static_cast<std::size_t>(p)) / q;
    PolStream out;
    out.fs = new_fs;
    out.samples.resize(n_out);
    // Output m taps the virtual upsampled stream at index m*q; only every
    // p-th upsampled sample is a real input sample.
    for (std::size_t m = 0; m < n_out; ++m) {
        const long long center = static_cast<long long>(m) * q;
        cpx acc(0, 0);
        // virtual index v = center - half + j must satisfy v % p == 0
        long long v_lo = center - half;
        long long rem = ((v_lo % p) + p) % p;
        long long v = v_lo + (rem == 0 ? 0 : p - rem);
        for (; v <= center + half; v += p) {
            long long n = v / p;
            if (n < 0 || n >= static_cast<long long>(n_in)) continue;
            acc += stream.samples[static_cast<std::size_t>(n)] * h[static_cast<std::size_t>(v - v_lo)];
        }
        out.samples[m] = acc;
    }
    return out;
}

double mean_power(const std::vector<cpx>& v) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& z : v) acc += std::norm(z);
    return acc / static_cast<double>(v.size());
}

// --- RNG (xoshiro256++ with Box-Muller) -------------------------------------

namespace {
uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& s : s_) s = splitmix64(x);
}

uint64_t Rng::next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
    // Box-Muller; discard the second value to keep the stream simple.
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

cpx Rng::cgaussian() {
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-std::log(u1));  // so E|z|^2 = 1
    return cpx(r * std::cos(2.0 * std::numbers::pi * u2), r * std::sin(2.0 * std::numbers::pi * u2));
}

}  // namespace cobm
