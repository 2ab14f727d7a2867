#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace dropmark {

// SHA-256 digest of an arbitrary byte string.
std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);

// One 64-byte ChaCha20 block: 32-byte key, 64-bit block counter, zero nonce.
// Exposed so tests can pin the primitive against published vectors.
std::array<std::uint8_t, 64> chacha20_block(const std::array<std::uint8_t, 32>& key,
                                            std::uint64_t counter,
                                            const std::array<std::uint8_t, 8>& nonce);

// Deterministic keyed random stream: key = SHA-256(seed), bytes = ChaCha20
// keystream under that key with zero nonce and block counter starting at 0.
// Copying a stream clones it at its current position. Identical seeds give
// identical streams on every platform.
class KeyedStream {
  public:
    explicit KeyedStream(std::span<const std::uint8_t> seed);
    explicit KeyedStream(std::string_view seed);

    // Stream keyed from the big-endian 8-byte encoding of a raw 64-bit
    // integer (the per-period reseed path).
    static KeyedStream from_raw_u64(std::uint64_t raw);

    // Next 8 keystream bytes, little-endian.
    std::uint64_t next_u64();

    // next_u64 mapped into [0, 1): top 53 bits scaled by 2^-53. Strictly
    // below 1.0 for every input word.
    double next_real();

    // Number of u64 draws consumed so far.
    std::uint64_t draws() const { return draws_; }

    const std::array<std::uint8_t, 32>& key() const { return key_; }

  private:
    void refill();

    std::array<std::uint8_t, 32> key_{};
    std::array<std::uint8_t, 64> block_{};
    std::uint64_t counter_ = 0;  // next block index
    std::size_t offset_ = 64;    // consumed bytes of block_
    std::uint64_t draws_ = 0;
};

double u64_to_unit_real(std::uint64_t u);

}  // namespace dropmark
