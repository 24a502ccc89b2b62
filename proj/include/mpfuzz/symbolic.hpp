#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpfuzz/mempool.hpp"

namespace mpfuzz {

enum class Symbol { N, F, P, C, O, L, R, E };

char to_char(Symbol s);

struct SymbolizedTx {
    Symbol symbol = Symbol::N;
    uint32_t variant = 0;  // P: price-rank gap; C/O/L/R: 1-based sender group
    bool bare = false;     // printed without variant (P with a single gap)

    bool operator==(const SymbolizedTx& o) const {
        return symbol == o.symbol && variant == o.variant;
    }
    auto operator<=>(const SymbolizedTx& o) const {
        return std::pair{symbol, variant} <=> std::pair{o.symbol, o.variant};
    }
};

using SymbolizedInput = std::vector<SymbolizedTx>;

std::string to_string(const SymbolizedTx& s);
std::string to_string(const SymbolizedInput& in);
SymbolizedInput parse_input(const std::string& text);  // "P C1 P0 C1 C1"

struct SymbolizedState {
    uint32_t m = 0;
    std::vector<Symbol> symbols;
    std::vector<int64_t> prices;   // per symbol; only P entries are read by cost()
    std::vector<uint32_t> groups;  // per symbol: 1-based adversarial group, 0 if none

    std::string key() const;
    size_t count(Symbol s) const;
    bool operator==(const SymbolizedState&) const = default;
};

// Concrete prices during fuzzing are scaled by kKeyScale so a new parent can
// always be priced between two resident ones.
inline constexpr int64_t kKeyScale = int64_t{1} << 32;

struct InstContext {
    uint32_t next_adversary = 1;
    std::vector<int64_t> p_keys;  // every P price instantiated so far, sorted
    bool operator==(const InstContext&) const = default;
};

// Pool plus the instantiation bookkeeping of the input that produced it.
struct Execution {
    MempoolState pool;
    InstContext ctx;
    std::vector<Transaction> history;  // every tx offered, in order
    bool operator==(const Execution&) const = default;
};

Execution start_filled(const MempoolPolicy& policy);  // m normal txs at price 3
Execution start_empty(const MempoolPolicy& policy);

Symbol symbolize_tx(const Transaction& tx, const MempoolState& pool);
// ctx maps scaled prices back to 4,5,... ranks; without it prices are taken as is
SymbolizedState symbolize_state(const MempoolState& pool, const InstContext* ctx = nullptr);
inline SymbolizedState symbolize(const Execution& e) { return symbolize_state(e.pool, &e.ctx); }

// adversarial senders owning a nonce chain, in symbolized order
std::vector<Address> sender_groups(const MempoolState& pool);

std::optional<Transaction> instantiate(const SymbolizedTx& sym, const Execution& e);
std::vector<SymbolizedTx> enumerate_mutations(const Execution& e);

// instantiate + admit; nullopt when the symbol is infeasible
std::optional<AdmissionOutcome> apply(Execution& e, const SymbolizedTx& sym);
// benign probe at price 3 (scaled)
AdmissionOutcome apply_normal(Execution& e);
std::optional<Execution> execute(const MempoolPolicy& policy, const SymbolizedInput& in, bool filled);

// txs with scaled prices mapped to their reported prices
Transaction report_tx(const Transaction& tx, const InstContext& ctx);

int64_t cost(const SymbolizedState& st);
int64_t opcost(const SymbolizedState& st);

}  // namespace mpfuzz
