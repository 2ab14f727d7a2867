#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dropmark/loss_vector.hpp"

namespace dropmark {

// Burst-loss chain over states k in {-n..-1, 1..n} (no zero state).
// k > 0 means the last k events were drops, k < 0 means the last |k| events
// were forwards, both saturating at n. Each state carries its own drop
// probability, which is what lets generated loss mimic the run-length
// structure of a congested queue rather than an i.i.d. coin.
struct GilbertParams {
    int n = 0;
    // Drop probabilities in ascending state order: -n, ..., -1, 1, ..., n.
    std::vector<double> probs;

    static GilbertParams uniform(int n, double p);

    double p(int k) const;
    void set_p(int k, double value);
    void validate() const;  // throws std::invalid_argument
};

struct GilbertState {
    int k;
};

// State transitions. A drop moves toward +n, a forward moves toward -n;
// crossing zero jumps straight to +1 / -1.
int drop_successor(int k, int n);
int forward_successor(int k, int n);

struct StepResult {
    bool drop;
    GilbertState next;
};

// One event: drop iff u < p(k). u must lie in [0, 1).
StepResult step(GilbertState s, const GilbertParams& params, double u);

int initial_state(int n);  // -n: history assumed loss-free

// Maximum-likelihood per-state drop frequencies from an observed loss
// vector, walking the same transition rules from the initial state.
// States never visited fall back to the global mean of the vector.
GilbertParams estimate_params(const BinaryLossVector& observed, int n);

struct StationaryRate {
    double rate = 0.0;
    // True when some probability is exactly 0 or 1 and the chain is not
    // irreducible; the rate then covers only the recurrent class reachable
    // from the initial state.
    bool degenerate = false;
};

// Exact long-run drop frequency of the chain (stationary distribution of
// the 2n-state transition matrix, dotted with the drop probabilities).
StationaryRate stationary_drop_rate(const GilbertParams& params);

// Text form: "n=<int>" then one "k=<int> p=<decimal>" line per state in
// ascending k, 15 significant digits.
std::string params_to_text(const GilbertParams& params);
GilbertParams params_from_text(const std::string& text);
void save_params(const GilbertParams& params, const std::string& path);
GilbertParams load_params(const std::string& path);

}  // namespace dropmark
