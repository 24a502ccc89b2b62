#pragma once

#include <string>
#include <vector>

#include "mpfuzz/fuzzer.hpp"

namespace mpfuzz {

enum class BaselineKind { B1_Stateless, B2_ConcreteCoverage, B3_InvalidTxEnergy, B4_NoPromising };

std::string to_string(BaselineKind k);
BaselineKind baseline_from(const std::string& s);  // "B1".."B4" or full names

struct BaselineResult {
    std::vector<Exploit> exploits;
    uint64_t mutations = 0;
    uint64_t first_exploit_at = 0;  // 0 = none
};

// senders A1..Am x nonces 1..m x prices 4..m+3 x values 1..m
std::vector<Transaction> concrete_grid(uint32_t m);
// canonical key of a pool: residents sorted by sender then nonce
std::string concrete_state_key(const MempoolState& s);

// eviction timelines from the N-filled pool; cfg.mode selects the oracle
BaselineResult run_baseline(BaselineKind kind, const MempoolPolicy& policy, const FuzzConfig& cfg);

}  // namespace mpfuzz
