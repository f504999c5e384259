// Designed burst preamble construction: dual-tone Preamble A, signed CAZAC
// triplet Preamble B, pilot insertion, and full frame assembly.

#pragma once

#include <array>
#include <string>

#include "cobm/sigcore.hpp"

namespace cobm {

// Preamble A: 128 symbols per polarization. X carries a half-baud-rate tone
// (period 2), Y a quarter-baud-rate tone (period 4). Both constant modulus.
struct PreambleA {
    std::vector<cpx> x_symbols;
    std::vector<cpx> y_symbols;
    static constexpr int length = 128;
    static constexpr int period_x = 2;
    static constexpr int period_y = 4;
};

PreambleA gen_preamble_a();

// Zadoff-Chu even-length CAZAC: exp(-j*pi*u*n^2/length). Seed u must be odd.
std::vector<cpx> gen_cazac(int length, int seed_u);

// Preamble B: three 64-symbol CAZAC blocks per polarization with sign
// patterns [+1,+1,-1] (X) and [-1,+1,+1] (Y).
struct PreambleB {
    std::vector<cpx> bx;  // 64 symbols, root u_x
    std::vector<cpx> by;  // 64 symbols, root u_y
    std::array<int, 3> sign_x{+1, +1, -1};
    std::array<int, 3> sign_y{-1, +1, +1};
    std::vector<cpx> assembled_x;  // 192 symbols
    std::vector<cpx> assembled_y;  // 192 symbols
    int block_len = 64;
};

PreambleB build_preamble_b(int u_x = 1, int u_y = 3, int block_len = 64);

// Symbol-level frame map. Counts are fixed by the burst design; the final
// pilot block carries the payload remainder.
struct FrameLayout {
    int n_pre_a = 128;
    int n_pre_b = 192;
    int pilot_block = 32;  // 1 pilot + 31 payload symbols
    int n_payload = 32400;
    int n_pilot = 1046;

    int total() const { return n_pre_a + n_pre_b + n_payload + n_pilot; }
    int payload_region() const { return n_payload + n_pilot; }
    int payload_start() const { return n_pre_a + n_pre_b; }
    // Pilot positions relative to frame start.
    std::vector<int> pilot_positions() const;
    bool is_pilot(int payload_region_index) const {
        return payload_region_index % pilot_block == 0;
    }
    std::string to_json() const;
    static FrameLayout from_json(const std::string& text);
};

// Deterministic pilot source shared by transmitter and receiver: outer-ring
// QPSK points of the 16QAM grid drawn from a seeded generator.
std::vector<cpx> gen_pilots(int count, uint64_t seed, const QamGrid& grid);

// One transmitted burst: symbol streams plus the ground truth needed for BER.
struct TxFrame {
    std::vector<cpx> x_symbols;  // layout.total() symbols
    std::vector<cpx> y_symbols;
    std::vector<uint8_t> bits_x;  // 4 * n_payload bits
    std::vector<uint8_t> bits_y;
    FrameLayout layout;
    uint64_t pilot_seed = 0;
};

// payload bits must hold exactly 4*n_payload bits per polarization.
TxFrame build_frame(const std::vector<uint8_t>& payload_bits_x,
                    const std::vector<uint8_t>& payload_bits_y, const PreambleA& pre_a,
                    const PreambleB& pre_b, uint64_t pilot_seed, const QamGrid& grid,
                    const FrameLayout& layout = FrameLayout{});

// Convenience: random-payload frame from one seed.
TxFrame random_frame(uint64_t seed, const QamGrid& grid, const FrameLayout& layout = FrameLayout{});

// Payload symbols (pilots stripped) -> bits, inverse of the build_frame
// payload packing.
std::vector<uint8_t> deserialize_payload(const std::vector<cpx>& payload_symbols,
                                         const QamGrid& grid);

}  // namespace cobm
