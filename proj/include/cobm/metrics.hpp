// Evaluation metrics (BER, PMNR, EVM) and the independent least-squares
// oracle used to validate the closed-form channel estimator.

#pragma once

#include "cobm/preambles.hpp"
#include "cobm/sigcore.hpp"

namespace cobm {

struct BerRecord {
    std::size_t bits_compared = 0;
    std::size_t bit_errors = 0;
    double ber = 0.0;
    double ber_first_20k = 0.0;
    std::vector<std::size_t> error_positions;
};

BerRecord ber(const std::vector<uint8_t>& tx_bits, const std::vector<uint8_t>& rx_bits,
              std::size_t first_n = 20000);

// 10*log10(metric[peak] / max outside +-exclusion).
double pmnr(const std::vector<double>& metric, std::size_t peak_index, int exclusion = 2);

double evm_rms(const std::vector<cpx>& rx, const std::vector<cpx>& ref);

// Three 64-symbol estimation blocks per polarization (time domain).
struct BlockTriple {
    std::array<std::vector<cpx>, 3> x, y;
};

BlockTriple tx_blocks_from_preamble(const PreambleB& pre_b);

struct LsTaps {
    std::vector<cpx> w_xx, w_xy, w_yx, w_yy;
};

// Independent per-bin stacked least squares via explicit normal-equation
// inversion. Uses its own O(N^2) DFT on purpose: no code shared with the
// receiver path it validates. Throws EstimationError on a singular system.
LsTaps ls_oracle(const BlockTriple& rx_blocks, const BlockTriple& tx_blocks);

// Mean and normal-approximation 95% half-width over per-seed results.
struct SweepPoint {
    std::string variable;
    double value = 0.0;
    std::vector<uint64_t> seeds;
    double mean = 0.0;
    double half_width95 = 0.0;
};

SweepPoint aggregate_sweep(const std::string& variable, double value,
                           const std::vector<uint64_t>& seeds, const std::vector<double>& samples);

}  // namespace cobm
