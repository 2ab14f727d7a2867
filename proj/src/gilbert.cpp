#include "dropmark/gilbert.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dropmark {

namespace {

// probs index for state k: states are laid out -n..-1, 1..n.
int state_index(int k, int n) { return k < 0 ? k + n : n + k - 1; }

int index_state(int idx, int n) { return idx < n ? idx - n : idx - n + 1; }

}  // namespace

GilbertParams GilbertParams::uniform(int n, double p) {
    GilbertParams g;
    g.n = n;
    g.probs.assign(static_cast<std::size_t>(2 * n), p);
    g.validate();
    return g;
}

double GilbertParams::p(int k) const {
    if (k == 0 || k < -n || k > n) throw std::invalid_argument("state out of range");
    return probs[state_index(k, n)];
}

void GilbertParams::set_p(int k, double value) {
    if (k == 0 || k < -n || k > n) throw std::invalid_argument("state out of range");
    probs[state_index(k, n)] = value;
}

void GilbertParams::validate() const {
    if (n < 1) throw std::invalid_argument("memory depth n must be >= 1");
    if (probs.size() != static_cast<std::size_t>(2 * n))
        throw std::invalid_argument("expected 2n probabilities");
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("drop probabilities must lie in [0, 1]");
    }
}

int drop_successor(int k, int n) { return std::max(1, std::min(k + 1, n)); }

int forward_successor(int k, int n) { return std::min(-1, std::max(k - 1, -n)); }

int initial_state(int n) { return -n; }

StepResult step(GilbertState s, const GilbertParams& params, double u) {
    if (s.k == 0 || s.k < -params.n || s.k > params.n)
        throw std::invalid_argument("invalid chain state");
    if (!(u >= 0.0 && u < 1.0)) throw std::invalid_argument("u must lie in [0, 1)");
    bool drop = u < params.p(s.k);
    int next = drop ? drop_successor(s.k, params.n) : forward_successor(s.k, params.n);
    return {drop, GilbertState{next}};
}

GilbertParams estimate_params(const BinaryLossVector& observed, int n) {
    if (n < 1) throw std::invalid_argument("memory depth n must be >= 1");
    if (observed.empty()) throw std::invalid_argument("cannot fit to an empty vector");

    std::vector<std::int64_t> visits(static_cast<std::size_t>(2 * n), 0);
    std::vector<std::int64_t> drops(static_cast<std::size_t>(2 * n), 0);

    int k = initial_state(n);
    for (std::uint8_t bit : observed.bits) {
        int idx = state_index(k, n);
        ++visits[idx];
        if (bit) {
            ++drops[idx];
            k = drop_successor(k, n);
        } else {
            k = forward_successor(k, n);
        }
    }

    double global_mean = observed.mean();
    GilbertParams out;
    out.n = n;
    out.probs.resize(static_cast<std::size_t>(2 * n));
    for (int idx = 0; idx < 2 * n; ++idx) {
        out.probs[idx] = visits[idx] > 0
                             ? static_cast<double>(drops[idx]) / static_cast<double>(visits[idx])
                             : global_mean;
    }
    return out;
}

StationaryRate stationary_drop_rate(const GilbertParams& params) {
    params.validate();
    const int n = params.n;
    const int m = 2 * n;

    // Positive-probability transition targets per state.
    std::vector<std::vector<int>> edges(m);
    for (int idx = 0; idx < m; ++idx) {
        int k = index_state(idx, n);
        double p = params.probs[idx];
        if (p > 0.0) edges[idx].push_back(state_index(drop_successor(k, n), n));
        if (p < 1.0) edges[idx].push_back(state_index(forward_successor(k, n), n));
    }

    // Reachability closure (tiny graphs; O(m^3) is fine).
    std::vector<std::vector<bool>> reach(m, std::vector<bool>(m, false));
    for (int s = 0; s < m; ++s) {
        std::vector<int> stack{s};
        reach[s][s] = true;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int w : edges[v]) {
                if (!reach[s][w]) {
                    reach[s][w] = true;
                    stack.push_back(w);
                }
            }
        }
    }

    // Descend from the initial state to a sink strongly connected class:
    // keep moving to any reachable state that cannot get back.
    int cur = state_index(initial_state(n), n);
    bool moved = true;
    while (moved) {
        moved = false;
        for (int w = 0; w < m; ++w) {
            if (reach[cur][w] && !reach[w][cur]) {
                cur = w;
                moved = true;
                break;
            }
        }
    }
    std::vector<int> cls;
    for (int w = 0; w < m; ++w) {
        if (reach[cur][w] && reach[w][cur]) cls.push_back(w);
    }

    StationaryRate out;
    out.degenerate = static_cast<int>(cls.size()) != m;

    const int c = static_cast<int>(cls.size());
    if (c == 1) {
        out.rate = params.probs[cls[0]];
        return out;
    }

    std::vector<int> pos(m, -1);
    for (int i = 0; i < c; ++i) pos[cls[i]] = i;

    // Solve pi^T P = pi^T with sum(pi) = 1 on the recurrent class.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(c, c);
    for (int i = 0; i < c; ++i) {
        int idx = cls[i];
        int k = index_state(idx, n);
        double p = params.probs[idx];
        int up = pos[state_index(drop_successor(k, n), n)];
        int down = pos[state_index(forward_successor(k, n), n)];
        if (p > 0.0) a(up, i) += p;
        if (p < 1.0) a(down, i) += 1.0 - p;
    }
    a -= Eigen::MatrixXd::Identity(c, c);
    for (int j = 0; j < c; ++j) a(c - 1, j) = 1.0;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(c);
    b(c - 1) = 1.0;
    Eigen::VectorXd pi = a.colPivHouseholderQr().solve(b);

    double rate = 0.0;
    for (int i = 0; i < c; ++i) rate += pi(i) * params.probs[cls[i]];
    out.rate = rate;
    return out;
}

std::string params_to_text(const GilbertParams& params) {
    params.validate();
    std::ostringstream out;
    out << "n=" << params.n << "\n";
    char buf[64];
    for (int idx = 0; idx < 2 * params.n; ++idx) {
        std::snprintf(buf, sizeof buf, "k=%d p=%.17g\n", index_state(idx, params.n),
                      params.probs[idx]);
        out << buf;
    }
    return out.str();
}

GilbertParams params_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty parameter text");
    int n = 0;
    if (std::sscanf(line.c_str(), "n=%d", &n) != 1 || n < 1)
        throw std::runtime_error("parameter text must start with n=<int>");

    GilbertParams out;
    out.n = n;
    out.probs.assign(static_cast<std::size_t>(2 * n), -1.0);
    int seen = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int k = 0;
        double p = 0.0;
        if (std::sscanf(line.c_str(), "k=%d p=%lf", &k, &p) != 2)
            throw std::runtime_error("bad parameter line: " + line);
        if (k == 0 || k < -n || k > n) throw std::runtime_error("state out of range: " + line);
        out.probs[state_index(k, n)] = p;
        ++seen;
    }
    if (seen != 2 * n) throw std::runtime_error("parameter text must list all 2n states");
    out.validate();
    return out;
}

void save_params(const GilbertParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << params_to_text(params);
}

GilbertParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return params_from_text(buf.str());
}

}  // namespace dropmark
