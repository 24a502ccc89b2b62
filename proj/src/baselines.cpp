#include "mpfuzz/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <map>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace mpfuzz {

std::string to_string(BaselineKind k) {
    switch (k) {
        case BaselineKind::B1_Stateless: return "B1";
        case BaselineKind::B2_ConcreteCoverage: return "B2";
        case BaselineKind::B3_InvalidTxEnergy: return "B3";
        case BaselineKind::B4_NoPromising: return "B4";
    }
    return "?";
}

BaselineKind baseline_from(const std::string& s) {
    if (s == "B1" || s == "B1_Stateless") return BaselineKind::B1_Stateless;
    if (s == "B2" || s == "B2_ConcreteCoverage") return BaselineKind::B2_ConcreteCoverage;
    if (s == "B3" || s == "B3_InvalidTxEnergy") return BaselineKind::B3_InvalidTxEnergy;
    if (s == "B4" || s == "B4_NoPromising") return BaselineKind::B4_NoPromising;
    throw std::invalid_argument("unknown baseline: " + s);
}

std::vector<Transaction> concrete_grid(uint32_t m) {
    std::vector<Transaction> g;
    g.reserve(static_cast<size_t>(m) * m * m * m);
    for (uint32_t s = 1; s <= m; ++s)
        for (uint64_t n = 1; n <= m; ++n)
            for (int64_t p = 4; p <= static_cast<int64_t>(m) + 3; ++p)
                for (int64_t v = 1; v <= static_cast<int64_t>(m); ++v)
                    g.push_back(Transaction{{Role::Adversarial, s}, n, v, p});
    return g;
}

std::string concrete_state_key(const MempoolState& s) {
    std::vector<Transaction> txs;
    for (const auto& sl : s.slots) txs.push_back(sl.tx);
    std::sort(txs.begin(), txs.end(), [](const Transaction& a, const Transaction& b) {
        return std::tie(a.sender, a.nonce, a.gas_price, a.value) <
               std::tie(b.sender, b.nonce, b.gas_price, b.value);
    });
    std::string k;
    for (const auto& t : txs) {
        k += t.sender.role == Role::Benign ? 'B' : 'A';
        k += std::to_string(t.sender.index) + ':' + std::to_string(t.nonce) + ':' +
             std::to_string(t.value) + ':' + std::to_string(t.gas_price) + ';';
    }
    return k;
}

namespace {

Execution filled_plain(const MempoolPolicy& policy) {
    Execution e;
    e.pool = new_pool(policy, WorldState::for_capacity(policy.m));
    for (uint32_t i = 0; i < policy.m; ++i) {
        e.history.push_back(normal_tx(e.pool, 3));
        admit_in_place(e.pool, e.history.back());
    }
    return e;
}

void offer(Execution& e, const Transaction& tx) {
    e.history.push_back(tx);
    admit_in_place(e.pool, tx);
}

size_t invalid_count(const MempoolState& s) {
    size_t n = 0;
    for (auto c : s.slot_classes()) n += c != ValidityClass::Pending;
    return n;
}

struct Budget {
    const FuzzConfig& cfg;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    bool spent(uint64_t mutations) const {
        if (mutations >= cfg.max_mutations) return true;
        if ((mutations & 1023) != 0) return false;
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >=
               cfg.max_seconds;
    }
};

// returns true when the run should stop
bool record(BaselineResult& res, const Execution& e, const FuzzConfig& cfg) {
    auto x = check_exploit(e, {}, true, cfg);
    if (!x) return false;
    x->found_at = res.mutations;
    if (!res.first_exploit_at) res.first_exploit_at = res.mutations;
    res.exploits.push_back(std::move(*x));
    return cfg.stop_at_first;
}

BaselineResult run_b1(const MempoolPolicy& policy, const FuzzConfig& cfg) {
    BaselineResult res;
    std::mt19937_64 rng(cfg.rng_seed);
    const Execution start = filled_plain(policy);
    const uint32_t m = policy.m;
    std::uniform_int_distribution<uint32_t> len(1, 2 * m), grid(1, m);
    Budget budget{cfg};
    while (!budget.spent(res.mutations)) {
        ++res.mutations;
        Execution e = start;
        const uint32_t n = len(rng);
        for (uint32_t i = 0; i < n; ++i) {
            Transaction tx{{Role::Adversarial, grid(rng)}, grid(rng), 0, 0};
            tx.gas_price = 3 + grid(rng);
            tx.value = grid(rng);
            offer(e, tx);
        }
        if (record(res, e, cfg)) break;
    }
    return res;
}

// B2 (FIFO) and B3 (most invalid residents first)
BaselineResult run_grid(const MempoolPolicy& policy, const FuzzConfig& cfg, bool by_invalid) {
    BaselineResult res;
    std::mt19937_64 rng(cfg.rng_seed);
    auto grid = concrete_grid(policy.m);
    std::shuffle(grid.begin(), grid.end(), rng);

    struct Entry {
        Execution exec;
        uint64_t order;
    };
    std::deque<Entry> fifo;
    std::multimap<std::pair<size_t, uint64_t>, Execution> prio;  // (-invalid, order)
    std::unordered_set<std::string> covered;
    uint64_t order = 0;
    auto push = [&](Execution e) {
        if (by_invalid) {
            const size_t inv = invalid_count(e.pool);
            prio.emplace(std::pair{policy.m - inv, order++}, std::move(e));
        } else {
            fifo.push_back({std::move(e), order++});
        }
    };
    Execution start = filled_plain(policy);
    covered.insert(concrete_state_key(start.pool));
    push(std::move(start));

    Budget budget{cfg};
    while (!(by_invalid ? prio.empty() : fifo.empty())) {
        Execution seed;
        if (by_invalid) {
            seed = std::move(prio.begin()->second);
            prio.erase(prio.begin());
        } else {
            seed = std::move(fifo.front().exec);
            fifo.pop_front();
        }
        for (const auto& tx : grid) {
            if (budget.spent(res.mutations)) return res;
            ++res.mutations;
            Execution e = seed;
            offer(e, tx);
            if (record(res, e, cfg)) return res;
            if (covered.insert(concrete_state_key(e.pool)).second) push(std::move(e));
        }
    }
    return res;
}

}  // namespace

BaselineResult run_baseline(BaselineKind kind, const MempoolPolicy& policy, const FuzzConfig& cfg) {
    switch (kind) {
        case BaselineKind::B1_Stateless: return run_b1(policy, cfg);
        case BaselineKind::B2_ConcreteCoverage: return run_grid(policy, cfg, false);
        case BaselineKind::B3_InvalidTxEnergy: return run_grid(policy, cfg, true);
        case BaselineKind::B4_NoPromising: {
            FuzzConfig c = cfg;
            c.promising = false;
            auto r = run_mpfuzz(policy, c);
            return BaselineResult{std::move(r.exploits), r.mutations, r.first_exploit_at};
        }
    }
    throw std::invalid_argument("unknown baseline");
}

}  // namespace mpfuzz
