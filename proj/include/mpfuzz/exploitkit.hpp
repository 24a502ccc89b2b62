#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpfuzz/fuzzer.hpp"

namespace mpfuzz {

enum class Pattern { XT1 = 1, XT2, XT3, XT4, XT5, XT6, XT7, XT8, XT9 };

std::string to_string(Pattern p);
Pattern pattern_from(const std::string& s);
std::vector<Pattern> all_patterns();

// zero fields are derived from the policy
struct XtParams {
    uint32_t k = 0;           // sequences (senders) in the first step
    uint32_t l = 0;           // txs per sequence
    int64_t scale = 0;        // price unit; normal txs cost 3*scale
    std::vector<int64_t> prices;  // pattern-specific overrides, see generate_xt
};

struct XtPlan {
    Pattern pattern = Pattern::XT1;
    OracleKind kind = OracleKind::Eviction;
    bool compatible = true;
    std::string note;  // why the plan is incompatible
    int64_t normal_price = 3;
    std::vector<Transaction> txs;  // attack txs only
    std::vector<bool> must_admit;  // per tx: the pattern fails if this one is declined
    std::vector<size_t> steps;     // tx count per attack step
    uint32_t probes = 0;           // benign probes after the attack (locking)
};

XtPlan generate_xt(Pattern p, const MempoolPolicy& policy, const XtParams& params = {});

struct PlanRun {
    bool success = false;
    OracleVerdict verdict;
    MempoolState end;
    std::vector<Transaction> timeline;  // fills, attack, probes
    std::optional<size_t> first_refused;  // index into plan.txs of a declined must_admit tx
};

// fresh pool, m normal fills (eviction), attack, m probes (locking), oracle
PlanRun run_plan(const XtPlan& plan, const MempoolPolicy& policy, const OracleConfig& cfg = {});

Exploit to_exploit(const XtPlan& plan, const PlanRun& run, const MempoolPolicy& policy);

// Table 3 cells for the base presets
bool expected_present(Pattern p, const std::string& preset);

struct MatrixCell {
    Pattern pattern;
    std::string preset;
    bool expected = false;
    bool observed = false;
    OracleVerdict verdict;
};
// reduced preset used by the matrix; sender-limited presets get py2 = m/2, py3 scaled
MempoolPolicy matrix_policy(const std::string& preset, uint32_t m);

// every pattern against every base preset at reduced size m
std::vector<MatrixCell> evaluate_matrix(uint32_t m, const OracleConfig& cfg = {});

std::vector<Exploit> dedup(const std::vector<Exploit>& xs);

// timeline replay on a fresh pool of x.mut_config; recomputes the verdict
OracleVerdict replay_verdict(const Exploit& x, const OracleConfig& cfg = {});

struct ExtensionFailed : std::runtime_error {
    std::string trace;
    size_t divergence = 0;  // index into the extended attack
    ExtensionFailed(const std::string& msg, std::string tr, size_t at)
        : std::runtime_error(msg), trace(std::move(tr)), divergence(at) {}
};

struct Extension {
    Exploit exploit;
    std::string method;  // "repeat" or "schedule"
    std::string trace;
};

// throws ExtensionFailed
Extension extend(const Exploit& short_x, const MempoolPolicy& target, const OracleConfig& cfg = {});

int64_t base_price_step(int64_t bp, int64_t gas_used, int64_t block_limit);

struct WorkloadSpec {
    uint32_t per_block = 0;       // benign arrivals per block, 0 = m/2
    int64_t price = 3;            // benign price
    int64_t price_spread = 0;     // uniform extra in [0, spread]
    uint32_t txs_per_sender = 1;
    uint32_t block_txs = 0;       // txs per block, 0 = m/2
    uint64_t rng_seed = 0;
};

struct BlockRecord {
    uint64_t block = 0;
    int64_t base_price = 0;
    long double benign_fees = 0;
    long double adversarial_fees = 0;
    int64_t gas_used = 0;
    int64_t gas_limit = 0;
};

struct ReplayReport {
    long double success_rate = 0;
    long double cost_per_block = 0;         // fee units (price x gas)
    long double benign_fees_per_block = 0;
    long double asym = 0;
    uint64_t blocks = 0;
    bool feasible = true;
    std::string note;
    std::vector<BlockRecord> series;
};

// x may be null for a no-attack run
ReplayReport replay(const Exploit* x, const MempoolPolicy& policy, const WorkloadSpec& w,
                    uint64_t blocks, double attack_delay = 0);

ReplayReport simulate_xt8a(const MempoolPolicy& policy, const WorkloadSpec& w, uint64_t eviction_blocks,
                           int64_t lock_price, int64_t initial_base_price = 100'000'000'000'000LL,
                           uint64_t lock_blocks = 12);

nlohmann::ordered_json exploit_to_json(const Exploit& x);
Exploit exploit_from_json(const nlohmann::ordered_json& j);  // throws std::invalid_argument
nlohmann::ordered_json report_to_json(const ReplayReport& r);
std::string report_csv(const ReplayReport& r);

}  // namespace mpfuzz
