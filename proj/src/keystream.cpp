#include "dropmark/keystream.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <stdexcept>

namespace dropmark {

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data) {
    std::array<std::uint8_t, 32> out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != out.size())
        throw std::runtime_error("SHA-256 digest failed");
    return out;
}

namespace {

inline std::uint32_t rotl(std::uint32_t x, int r) { return (x << r) | (x >> (32 - r)); }

inline void quarter_round(std::uint32_t& a, std::uint32_t& b, std::uint32_t& c,
                          std::uint32_t& d) {
    a += b; d ^= a; d = rotl(d, 16);
    c += d; b ^= c; b = rotl(b, 12);
    a += b; d ^= a; d = rotl(d, 8);
    c += d; b ^= c; b = rotl(b, 7);
}

inline std::uint32_t load_le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::array<std::uint8_t, 64> chacha20_block(const std::array<std::uint8_t, 32>& key,
                                            std::uint64_t counter,
                                            const std::array<std::uint8_t, 8>& nonce) {
    std::uint32_t state[16];
    state[0] = 0x61707865;
    state[1] = 0x3320646e;
    state[2] = 0x79622d32;
    state[3] = 0x6b206574;
    for (int i = 0; i < 8; ++i) state[4 + i] = load_le32(key.data() + 4 * i);
    state[12] = static_cast<std::uint32_t>(counter);
    state[13] = static_cast<std::uint32_t>(counter >> 32);
    state[14] = load_le32(nonce.data());
    state[15] = load_le32(nonce.data() + 4);

    std::uint32_t x[16];
    std::memcpy(x, state, sizeof x);
    for (int round = 0; round < 10; ++round) {
        quarter_round(x[0], x[4], x[8], x[12]);
        quarter_round(x[1], x[5], x[9], x[13]);
        quarter_round(x[2], x[6], x[10], x[14]);
        quarter_round(x[3], x[7], x[11], x[15]);
        quarter_round(x[0], x[5], x[10], x[15]);
        quarter_round(x[1], x[6], x[11], x[12]);
        quarter_round(x[2], x[7], x[8], x[13]);
        quarter_round(x[3], x[4], x[9], x[14]);
    }

    std::array<std::uint8_t, 64> out;
    for (int i = 0; i < 16; ++i) {
        std::uint32_t v = x[i] + state[i];
        out[4 * i] = static_cast<std::uint8_t>(v);
        out[4 * i + 1] = static_cast<std::uint8_t>(v >> 8);
        out[4 * i + 2] = static_cast<std::uint8_t>(v >> 16);
        out[4 * i + 3] = static_cast<std::uint8_t>(v >> 24);
    }
    return out;
}

KeyedStream::KeyedStream(std::span<const std::uint8_t> seed) : key_(sha256(seed)) {}

KeyedStream::KeyedStream(std::string_view seed)
    : KeyedStream(std::span<const std::uint8_t>(
          reinterpret_cast<const std::uint8_t*>(seed.data()), seed.size())) {}

KeyedStream KeyedStream::from_raw_u64(std::uint64_t raw) {
    std::array<std::uint8_t, 8> be;
    for (int i = 0; i < 8; ++i) be[i] = static_cast<std::uint8_t>(raw >> (56 - 8 * i));
    return KeyedStream(std::span<const std::uint8_t>(be.data(), be.size()));
}

void KeyedStream::refill() {
    static const std::array<std::uint8_t, 8> zero_nonce{};
    block_ = chacha20_block(key_, counter_, zero_nonce);
    ++counter_;
    offset_ = 0;
}

std::uint64_t KeyedStream::next_u64() {
    if (offset_ + 8 > block_.size()) refill();
    std::uint64_t u = 0;
    for (int i = 7; i >= 0; --i) u = (u << 8) | block_[offset_ + static_cast<std::size_t>(i)];
    offset_ += 8;
    ++draws_;
    return u;
}

double u64_to_unit_real(std::uint64_t u) {
    return static_cast<double>(u >> 11) * 0x1.0p-53;
}

double KeyedStream::next_real() { return u64_to_unit_real(next_u64()); }

}  // namespace dropmark
