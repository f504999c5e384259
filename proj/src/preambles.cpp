#include "cobm/preambles.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "json.hpp"

namespace cobm {

PreambleA gen_preamble_a() {
    PreambleA a;
    a.x_symbols.resize(PreambleA::length);
    a.y_symbols.resize(PreambleA::length);
    // X: alternating +1/-1, a tone at Rs/2 (the Nyquist line lands at
    // +-Rs/2 after oversampled shaping). Y: the real quarter-rate tone
    // sqrt(2)*cos(pi*n/2 + pi/4) = (1,-1,-1,1,...), lines at +-Rs/4. Both
    // sidebands are required by the spectral-product SPO estimator.
    static const double y_pat[4] = {1.0, -1.0, -1.0, 1.0};
    for (int n = 0; n < PreambleA::length; ++n) {
        a.x_symbols[n] = cpx((n % 2 == 0) ? 1.0 : -1.0, 0.0);
        a.y_symbols[n] = cpx(y_pat[n % 4], 0.0);
    }
    return a;
}

std::vector<cpx> gen_cazac(int length, int seed_u) {
    if (length <= 0 || length % 2 != 0) throw ConfigError("gen_cazac: length must be even");
    if (std::gcd(seed_u, length) != 1)
        throw ConfigError("gen_cazac: seed must be coprime with the length (odd)");
    std::vector<cpx> out(length);
    for (int n = 0; n < length; ++n) {
        // keep n^2*u modulo 2*length before the float divide so long
        // sequences stay exact
        long long phase_num = (static_cast<long long>(n) * n % (2LL * length)) * seed_u;
        double ph = -std::numbers::pi * static_cast<double>(phase_num % (2LL * length)) /
                    static_cast<double>(length);
        out[n] = cpx(std::cos(ph), std::sin(ph));
    }
    return out;
}

PreambleB build_preamble_b(int u_x, int u_y, int block_len) {
    if (u_x == u_y)
        throw ConfigError("build_preamble_b: X and Y seeds must differ");
    PreambleB b;
    b.block_len = block_len;
    b.bx = gen_cazac(block_len, u_x);
    b.by = gen_cazac(block_len, u_y);
    b.assembled_x.reserve(3 * block_len);
    b.assembled_y.reserve(3 * block_len);
    for (int i = 0; i < 3; ++i) {
        for (int n = 0; n < block_len; ++n) {
            b.assembled_x.push_back(static_cast<double>(b.sign_x[i]) * b.bx[n]);
            b.assembled_y.push_back(static_cast<double>(b.sign_y[i]) * b.by[n]);
        }
    }
    return b;
}

std::vector<int> FrameLayout::pilot_positions() const {
    std::vector<int> pos;
    pos.reserve(n_pilot);
    for (int i = 0; i < n_pilot; ++i) pos.push_back(payload_start() + i * pilot_block);
    return pos;
}

std::string FrameLayout::to_json() const {
    nlohmann::json j;
    j["n_pre_a"] = n_pre_a;
    j["n_pre_b"] = n_pre_b;
    j["pilot_block"] = pilot_block;
    j["n_payload"] = n_payload;
    j["n_pilot"] = n_pilot;
    j["total"] = total();
    return j.dump(2);
}

FrameLayout FrameLayout::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    FrameLayout l;
    l.n_pre_a = j.at("n_pre_a").get<int>();
    l.n_pre_b = j.at("n_pre_b").get<int>();
    l.pilot_block = j.at("pilot_block").get<int>();
    l.n_payload = j.at("n_payload").get<int>();
    l.n_pilot = j.at("n_pilot").get<int>();
    if (j.contains("total") && j["total"].get<int>() != l.total())
        throw ConfigError("FrameLayout: total does not match the component counts");
    return l;
}

std::vector<cpx> gen_pilots(int count, uint64_t seed, const QamGrid& grid) {
    // outer-ring QPSK points: both rails at +-3/sqrt(10)
    std::vector<cpx> ring;
    double rmax = 0.0;
    for (const auto& p : grid.points) rmax = std::max(rmax, std::abs(p.real()));
    for (const auto& p : grid.points)
        if (std::abs(std::abs(p.real()) - rmax) < 1e-12 && std::abs(std::abs(p.imag()) - rmax) < 1e-12)
            ring.push_back(p);
    Rng rng(seed);
    std::vector<cpx> out(count);
    for (auto& s : out) s = ring[rng.next_u64() % ring.size()];
    return out;
}

TxFrame build_frame(const std::vector<uint8_t>& payload_bits_x,
                    const std::vector<uint8_t>& payload_bits_y, const PreambleA& pre_a,
                    const PreambleB& pre_b, uint64_t pilot_seed, const QamGrid& grid,
                    const FrameLayout& layout) {
    const std::size_t want = static_cast<std::size_t>(layout.n_payload) * 4;
    if (payload_bits_x.size() != want || payload_bits_y.size() != want)
        throw ShapeError("build_frame: payload must be exactly 4*n_payload bits per polarization");

    TxFrame f;
    f.layout = layout;
    f.pilot_seed = pilot_seed;
    f.bits_x = payload_bits_x;
    f.bits_y = payload_bits_y;

    auto payload_x = qam16_map(payload_bits_x, grid);
    auto payload_y = qam16_map(payload_bits_y, grid);
    auto pilots_x = gen_pilots(layout.n_pilot, pilot_seed, grid);
    auto pilots_y = gen_pilots(layout.n_pilot, pilot_seed + 1, grid);

    auto assemble = [&](const std::vector<cpx>& pre_a_syms, const std::vector<cpx>& pre_b_syms,
                        const std::vector<cpx>& payload, const std::vector<cpx>& pilots) {
        std::vector<cpx> s;
        s.reserve(layout.total());
        s.insert(s.end(), pre_a_syms.begin(), pre_a_syms.end());
        s.insert(s.end(), pre_b_syms.begin(), pre_b_syms.end());
        std::size_t pay = 0;
        int pilot_idx = 0;
        for (int i = 0; i < layout.payload_region(); ++i) {
            if (layout.is_pilot(i))
                s.push_back(pilots[pilot_idx++]);
            else
                s.push_back(payload[pay++]);
        }
        if (pay != payload.size() || pilot_idx != layout.n_pilot)
            throw ShapeError("build_frame: layout accounting mismatch");
        return s;
    };
    f.x_symbols = assemble(pre_a.x_symbols, pre_b.assembled_x, payload_x, pilots_x);
    f.y_symbols = assemble(pre_a.y_symbols, pre_b.assembled_y, payload_y, pilots_y);
    return f;
}

TxFrame random_frame(uint64_t seed, const QamGrid& grid, const FrameLayout& layout) {
    Rng rng(seed);
    const std::size_t nbits = static_cast<std::size_t>(layout.n_payload) * 4;
    std::vector<uint8_t> bx(nbits), by(nbits);
    for (auto& b : bx) b = static_cast<uint8_t>(rng.next_u64() & 1);
    for (auto& b : by) b = static_cast<uint8_t>(rng.next_u64() & 1);
    return build_frame(bx, by, gen_preamble_a(), build_preamble_b(), seed * 7919 + 1, grid, layout);
}

std::vector<uint8_t> deserialize_payload(const std::vector<cpx>& payload_symbols,
                                         const QamGrid& grid) {
    return qam16_demap(payload_symbols, grid);
}

}  // namespace cobm
