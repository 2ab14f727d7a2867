#include "dropmark/loss_vector.hpp"

#include <fstream>
#include <numeric>
#include <stdexcept>

namespace dropmark {

std::size_t BinaryLossVector::ones() const {
    return std::accumulate(bits.begin(), bits.end(), std::size_t{0});
}

double BinaryLossVector::mean() const {
    if (bits.empty()) return 0.0;
    return static_cast<double>(ones()) / static_cast<double>(bits.size());
}

void save_loss_vector(const BinaryLossVector& v, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (std::uint8_t b : v.bits) out << (b ? '1' : '0') << '\n';
}

BinaryLossVector load_loss_vector(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    BinaryLossVector v;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line == "0")
            v.bits.push_back(0);
        else if (line == "1")
            v.bits.push_back(1);
        else
            throw std::runtime_error(path + ": expected 0 or 1, got \"" + line + "\"");
    }
    return v;
}

}  // namespace dropmark
