// Core signal containers and numerical primitives shared by every stage:
// power-of-two DFT, RRC pulse shaping, rational resampling, 16QAM mapping.

#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cobm {

using cpx = std::complex<double>;

// Error taxonomy. Every precondition violation throws one of these so the
// CLI and python layer can report the failing stage by name.
struct DspError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : DspError {
    using DspError::DspError;
};
struct ConfigError : DspError {
    using DspError::DspError;
};
struct EstimationError : DspError {
    using DspError::DspError;
};
struct SyncError : DspError {
    using DspError::DspError;
};
struct ConvergenceError : DspError {
    using DspError::DspError;
};

// One polarization of a sampled complex baseband signal.
struct PolStream {
    std::vector<cpx> samples;
    double fs = 0.0;  // Sa/s

    std::size_t size() const { return samples.size(); }
};

// Aligned X/Y polarization pair. Both streams share length and rate.
struct DualPolBurst {
    PolStream x;
    PolStream y;

    std::size_t size() const { return x.samples.size(); }
    double fs() const { return x.fs; }
    void check() const {
        if (x.samples.size() != y.samples.size())
            throw ShapeError("DualPolBurst: X/Y length mismatch");
        if (x.fs != y.fs) throw ShapeError("DualPolBurst: X/Y sample-rate mismatch");
    }
};

struct DspParams {
    double rs = 32e9;      // baud rate
    double k_os = 2.0;     // oversampling rate (samples per symbol)
    int n_dft = 1024;      // detection/estimation DFT size
    double rolloff = 0.1;  // RRC roll-off
    int rrc_span = 32;     // shaping filter span in symbols

    double fs() const { return rs * k_os; }
    void validate() const;
};

bool is_pow2(std::size_t n);

// Fixed repo-wide convention: forward unscaled, inverse carries 1/N.
// Length must be a power of two.
std::vector<cpx> dft(const std::vector<cpx>& block);
std::vector<cpx> idft(const std::vector<cpx>& block);
// In-place variants used on hot paths.
void dft_inplace(std::vector<cpx>& block, bool inverse);

// Frequency of DFT bin k for an N-point transform at rate fs, in Hz,
// negative frequencies for k >= N/2.
double bin_freq(int k, int n, double fs);

// --- 16QAM ------------------------------------------------------------

// Gray-labeled 16QAM at unit average power. points[label] is the
// constellation point whose 4-bit label is `label` (b3 b2 -> I, b1 b0 -> Q).
struct QamGrid {
    int order = 16;
    std::vector<cpx> points;

    static QamGrid qam16();
};

std::vector<cpx> qam16_map(const std::vector<uint8_t>& bits, const QamGrid& grid);
std::vector<uint8_t> qam16_demap(const std::vector<cpx>& symbols, const QamGrid& grid);

// --- pulse shaping ------------------------------------------------------

// Windowed time-domain RRC taps at k_os samples/symbol, span symbols total,
// normalized so that sum(h^2) = k_os (unit-power symbols stay unit power).
std::vector<double> rrc_taps(const DspParams& params, int span);

// Upsample by k_os (integer) and shape. Output rate rs*k_os.
PolStream rrc_shape(const std::vector<cpx>& symbols, const DspParams& params, int span);

// Receiver-side RRC (matched) filter, 'same' alignment, scaled by 1/k_os so
// shape -> matched_filter -> decimate at the correct phase recovers symbols.
PolStream matched_filter(const PolStream& stream, const DspParams& params, int span);
DualPolBurst matched_filter(const DualPolBurst& burst, const DspParams& params, int span);

// --- resampling ---------------------------------------------------------

// Band-limited rational resampling (polyphase). new_fs/fs must reduce to
// p/q with p, q <= 64.
PolStream resample(const PolStream& stream, double new_fs);

// --- small helpers -------------------------------------------------------

std::vector<cpx> convolve_same(const std::vector<cpx>& x, const std::vector<double>& h);
double mean_power(const std::vector<cpx>& v);

// Deterministic RNG used everywhere randomness is needed. Box-Muller on top
// of a 64-bit generator so streams are reproducible across platforms.
class Rng {
  public:
    explicit Rng(uint64_t seed);
    double uniform();       // [0, 1)
    double gaussian();      // N(0, 1)
    cpx cgaussian();        // CN(0, 1)
    uint64_t next_u64();

  private:
    uint64_t s_[4];
};

}  // namespace cobm
