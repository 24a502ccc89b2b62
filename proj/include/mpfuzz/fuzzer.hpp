#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "mpfuzz/oracle.hpp"
#include "mpfuzz/symbolic.hpp"

namespace mpfuzz {

struct Exploit {
    OracleKind kind = OracleKind::Eviction;
    std::string pattern;  // XT tag, empty if unknown
    MempoolPolicy mut_config;
    SymbolizedInput symbol_sequence;
    // full timeline from an empty pool: initial normal txs, attack, probes
    std::vector<Transaction> concrete_txs;
    OracleVerdict verdict;
    std::string end_state;
    uint64_t found_at = 0;  // mutation index
};

// Standard: eps / lambda oracles.
// DeterInvalid: full eviction damage, exactly one valid adversarial tx left and
// latent overdrafts behind it (the XT3 target used when comparing baselines).
enum class OracleMode { Standard, DeterInvalid };

struct FuzzConfig {
    OracleConfig oracle;
    OracleMode mode = OracleMode::Standard;
    uint64_t max_mutations = 100000;
    double max_seconds = 60;
    uint64_t rng_seed = 0;
    bool use_cache = true;
    uint64_t audit_every = 97;  // re-execute and compare a cached state this often; 0 = never
    bool promising = true;      // false gives baseline B4
    bool eviction = true;
    bool locking = true;
    bool stop_at_first = false;
    std::ostream* log = nullptr;  // JSON lines
};

// energy b/opcost as an exact ratio; den == 0 with num > 0 is +infinity
struct Energy {
    int64_t num = 0;
    int64_t den = 1;
    bool operator==(const Energy&) const = default;
};
bool operator<(const Energy& a, const Energy& b);

struct Seed {
    SymbolizedInput input;
    SymbolizedState sym;
    std::optional<Execution> cached;
    std::vector<SymbolizedTx> candidates;
    std::vector<bool> tried;
    uint64_t insertion = 0;
    uint64_t selections = 0;
    bool probe_declined = false;

    bool exhausted() const;
};

Energy energy(const Seed& s);

struct Corpus {
    bool filled = true;  // eviction corpus starts N-filled, locking corpus starts empty
    std::deque<Seed> seeds;
    std::vector<std::string> covered;  // insertion order
    std::unordered_set<std::string> covered_set;
    uint64_t next_insertion = 0;

    bool is_covered(const std::string& key) const;
    Seed& add(Seed s);
    // index of max-energy seed, nullopt if all energies are zero
    std::optional<size_t> select_next() const;
};

Seed make_seed(SymbolizedInput input, Execution exec, const MempoolState* probe_base = nullptr);

bool st_promising(const SymbolizedState& st_new, const SymbolizedState& st_old, bool filled,
                  bool new_declines_probe, bool old_declines_probe);
bool probe_declined(const Execution& e);

struct MutationResult {
    SymbolizedInput input;
    Execution exec;
    SymbolizedState sym;
    AdmissionOutcome outcome;
};
std::optional<MutationResult> mutate_exec(Seed& seed, size_t candidate, const MempoolPolicy& policy,
                                          bool filled, bool use_cache);

struct FuzzResult {
    std::vector<Exploit> exploits;
    uint64_t mutations = 0;
    uint64_t first_exploit_at = 0;  // 0 = none
    size_t covered = 0;
    std::vector<std::string> insertions;  // "fill:NNP" etc, in order
};

FuzzResult run_mpfuzz(const MempoolPolicy& policy, const FuzzConfig& cfg);

// oracle on a finished execution; nullopt when it does not apply
std::optional<Exploit> check_exploit(const Execution& exec, const SymbolizedInput& input, bool filled,
                                     const FuzzConfig& cfg);
std::string guess_pattern(const Exploit& x, const SymbolizedState& end);

}  // namespace mpfuzz
