#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace dropmark {

// Ordered record of per-event loss outcomes: one entry per packet arrival
// (or per generated slot), 1 = dropped, 0 = forwarded.
struct BinaryLossVector {
    std::vector<std::uint8_t> bits;

    std::size_t size() const { return bits.size(); }
    bool empty() const { return bits.empty(); }
    std::uint8_t operator[](std::size_t i) const { return bits[i]; }

    std::size_t ones() const;
    double mean() const;  // fraction of ones; 0 on empty
};

// File format: one ASCII '0' or '1' per line.
void save_loss_vector(const BinaryLossVector& v, const std::string& path);
BinaryLossVector load_loss_vector(const std::string& path);

}  // namespace dropmark
