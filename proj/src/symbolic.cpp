#include "mpfuzz/symbolic.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mpfuzz {

char to_char(Symbol s) {
    static constexpr char kChars[] = "NFPCOLRE";
    return kChars[static_cast<int>(s)];
}

std::string to_string(const SymbolizedTx& s) {
    std::string out(1, to_char(s.symbol));
    switch (s.symbol) {
        case Symbol::P:
            if (!s.bare) out += std::to_string(s.variant);
            break;
        case Symbol::C:
        case Symbol::O:
        case Symbol::L:
        case Symbol::R: out += std::to_string(s.variant); break;
        default: break;
    }
    return out;
}

std::string to_string(const SymbolizedInput& in) {
    std::string out;
    for (const auto& s : in) {
        if (!out.empty()) out += ' ';
        out += to_string(s);
    }
    return out;
}

SymbolizedInput parse_input(const std::string& text) {
    SymbolizedInput out;
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) {
        SymbolizedTx s;
        const std::string letters = "NFPCOLRE";
        auto pos = letters.find(tok[0]);
        if (pos == std::string::npos) throw std::invalid_argument("bad symbol: " + tok);
        s.symbol = static_cast<Symbol>(pos);
        if (tok.size() > 1) s.variant = static_cast<uint32_t>(std::stoul(tok.substr(1)));
        else s.bare = s.symbol == Symbol::P;
        out.push_back(s);
    }
    return out;
}

std::string SymbolizedState::key() const {
    std::string k;
    for (auto s : symbols) k += to_char(s);
    return k;
}

size_t SymbolizedState::count(Symbol s) const {
    return static_cast<size_t>(std::count(symbols.begin(), symbols.end(), s));
}

namespace {

Execution start(const MempoolPolicy& policy) {
    Execution e;
    e.pool = new_pool(policy, WorldState::for_capacity(policy.m));
    return e;
}

bool is_parent(const Transaction& tx, const MempoolState& pool) {
    return tx.nonce == pool.world.account(tx.sender).confirmed_nonce + 1;
}

Symbol symbol_of(const Transaction& tx, ValidityClass cls, const MempoolState& pool) {
    if (tx.sender.role == Role::Benign) return cls == ValidityClass::Pending ? Symbol::N : Symbol::F;
    if (cls == ValidityClass::Future) return Symbol::F;
    if (is_parent(tx, pool)) return tx.value > 1 ? Symbol::R : Symbol::P;
    switch (cls) {
        case ValidityClass::LatentOverdraft: return Symbol::L;
        case ValidityClass::Overdraft: return Symbol::O;
        default: return Symbol::C;
    }
}

int64_t p_rank_price(int64_t key, const InstContext* ctx) {
    if (!ctx) return key;
    auto it = std::lower_bound(ctx->p_keys.begin(), ctx->p_keys.end(), key);
    if (it != ctx->p_keys.end() && *it == key) return 4 + (it - ctx->p_keys.begin());
    return key % kKeyScale == 0 ? key / kKeyScale : key;
}

// no invalid resident cheaper than `price` to absorb an invalid arrival
bool guard_blocks(const MempoolState& pool, const std::vector<ValidityClass>& cls, int64_t price) {
    if (pool.slots.size() < pool.policy.m) return false;
    for (size_t i = 0; i < pool.slots.size(); ++i)
        if (cls[i] != ValidityClass::Pending && pool.slots[i].tx.gas_price < price) return false;
    return true;
}

uint64_t chain_next(const MempoolState& pool, const Address& a) {
    uint64_t next = pool.world.account(a).confirmed_nonce + 1;
    for (const auto& t : pool.resident_of(a))
        if (t.nonce == next) ++next;
    return next;
}

}  // namespace

Execution start_filled(const MempoolPolicy& policy) {
    Execution e = start(policy);
    for (uint32_t i = 0; i < policy.m; ++i) apply_normal(e);
    return e;
}

Execution start_empty(const MempoolPolicy& policy) { return start(policy); }

Symbol symbolize_tx(const Transaction& tx, const MempoolState& pool) {
    for (size_t i = 0; i < pool.slots.size(); ++i)
        if (pool.slots[i].tx == tx) return symbol_of(tx, pool.slot_class(i), pool);
    auto resident = pool.resident_of(tx.sender);
    auto cls = classify(tx, pool.world, resident);
    if (cls == ValidityClass::Replacement) return Symbol::R;
    if (tx.sender.role == Role::Benign) return cls == ValidityClass::Pending ? Symbol::N : Symbol::F;
    switch (cls) {
        case ValidityClass::Future: return Symbol::F;
        case ValidityClass::Overdraft: return Symbol::O;
        case ValidityClass::LatentOverdraft: return Symbol::L;
        default: return is_parent(tx, pool) ? Symbol::P : Symbol::C;
    }
}

std::vector<Address> sender_groups(const MempoolState& pool) {
    std::vector<std::pair<int64_t, Address>> parents;
    for (const auto& s : pool.slots)
        if (s.tx.sender.role == Role::Adversarial && is_parent(s.tx, pool))
            parents.push_back({s.tx.gas_price, s.tx.sender});
    std::sort(parents.begin(), parents.end(), [](const auto& a, const auto& b) {
        return std::pair{a.first, a.second.index} < std::pair{b.first, b.second.index};
    });
    std::vector<Address> out;
    for (auto& p : parents) out.push_back(p.second);
    return out;
}

SymbolizedState symbolize_state(const MempoolState& pool, const InstContext* ctx) {
    const auto cls = pool.slot_classes();
    SymbolizedState st;
    st.m = pool.policy.m;
    size_t n = 0, f = 0;
    std::map<Address, std::vector<size_t>> chains;
    for (size_t i = 0; i < pool.slots.size(); ++i) {
        Symbol s = symbol_of(pool.slots[i].tx, cls[i], pool);
        if (s == Symbol::N) ++n;
        else if (s == Symbol::F) ++f;
        else chains[pool.slots[i].tx.sender].push_back(i);
    }
    auto push = [&](Symbol s, int64_t price, uint32_t group) {
        st.symbols.push_back(s);
        st.prices.push_back(price);
        st.groups.push_back(group);
    };
    for (size_t i = 0; i < n; ++i) push(Symbol::N, 3, 0);
    for (size_t i = 0; i < f; ++i) push(Symbol::F, 0, 0);
    uint32_t g = 0;
    for (const auto& a : sender_groups(pool)) {
        ++g;
        auto idx = chains[a];
        std::sort(idx.begin(), idx.end(), [&](size_t x, size_t y) {
            return pool.slots[x].tx.nonce < pool.slots[y].tx.nonce;
        });
        for (size_t i : idx) {
            const auto& tx = pool.slots[i].tx;
            push(symbol_of(tx, cls[i], pool), p_rank_price(tx.gas_price, ctx), g);
        }
    }
    while (st.symbols.size() < pool.policy.m) push(Symbol::E, 0, 0);
    return st;
}

namespace {

int64_t symbol_cost(Symbol s, int64_t price, uint32_t m, bool optimistic) {
    switch (s) {
        case Symbol::N: return 3;
        case Symbol::P: return price;
        case Symbol::C: return optimistic ? 1 : m + 4;
        case Symbol::R: return optimistic ? 0 : m + 4;
        default: return 0;
    }
}

}  // namespace

int64_t cost(const SymbolizedState& st) {
    int64_t c = 0;
    for (size_t i = 0; i < st.symbols.size(); ++i) c += symbol_cost(st.symbols[i], st.prices[i], st.m, false);
    return c;
}

int64_t opcost(const SymbolizedState& st) {
    int64_t c = 0;
    for (size_t i = 0; i < st.symbols.size(); ++i) c += symbol_cost(st.symbols[i], st.prices[i], st.m, true);
    return c;
}

std::optional<Transaction> instantiate(const SymbolizedTx& sym, const Execution& e) {
    const MempoolState& pool = e.pool;
    const MempoolPolicy& P = pool.policy;
    const int64_t m = P.m;
    const int64_t high = (m + 4) * kKeyScale;
    const Address fresh{Role::Adversarial, e.ctx.next_adversary};

    switch (sym.symbol) {
        case Symbol::P: {
            if (e.ctx.p_keys.size() >= P.m) return std::nullopt;
            std::vector<int64_t> keys;
            for (const auto& s : pool.slots)
                if (s.tx.sender.role == Role::Adversarial && is_parent(s.tx, pool) && s.tx.value == 1)
                    keys.push_back(s.tx.gas_price);
            std::sort(keys.begin(), keys.end());
            if (sym.variant > keys.size()) return std::nullopt;
            int64_t lo = sym.variant == 0 ? 3 * kKeyScale : keys[sym.variant - 1];
            int64_t hi = sym.variant == keys.size() ? high : keys[sym.variant];
            if (hi - lo < 2) return std::nullopt;
            return Transaction{fresh, 1, 1, lo + (hi - lo) / 2};
        }
        case Symbol::F: {
            auto cls = pool.slot_classes();
            size_t futures = std::count(cls.begin(), cls.end(), ValidityClass::Future);
            if (futures >= P.py1) return std::nullopt;
            if (P.future_evict_guard && guard_blocks(pool, cls, high)) return std::nullopt;
            return Transaction{fresh, static_cast<uint64_t>(m) + 1, 1, high};
        }
        case Symbol::C:
        case Symbol::O:
        case Symbol::L:
        case Symbol::R: {
            auto groups = sender_groups(pool);
            if (sym.variant < 1 || sym.variant > groups.size()) return std::nullopt;
            const Address g = groups[sym.variant - 1];
            const auto resident = pool.resident_of(g);
            if (sym.symbol == Symbol::R) {
                if (!P.replacement_allowed || P.replacement_overdraft_guard) return std::nullopt;
                Transaction tx{g, pool.world.account(g).confirmed_nonce + 1, m - 1, high};
                MempoolState trial = pool;
                auto before = trial.slot_classes();
                for (auto& s : trial.slots)
                    if (s.tx.sender == g && s.tx.nonce == tx.nonce) {
                        if (s.tx.gas_price >= tx.gas_price) return std::nullopt;
                        s.tx = tx;
                    }
                auto after = trial.slot_classes();
                for (size_t i = 0; i < after.size(); ++i)
                    if (after[i] == ValidityClass::LatentOverdraft &&
                        before[i] != ValidityClass::LatentOverdraft)
                        return tx;
                return std::nullopt;
            }
            // L: smallest value that overdraws together with the ancestors (m-1 behind P C)
            int64_t ancestors = 0;
            for (const auto& t : resident) ancestors += t.nonce < chain_next(pool, g) ? t.value : 0;
            const int64_t value = sym.symbol == Symbol::C   ? 1
                                  : sym.symbol == Symbol::O ? m + 1
                                                            : std::max<int64_t>(1, m + 1 - ancestors);
            Transaction tx{g, chain_next(pool, g), value, high};
            const auto c = classify(tx, pool.world, resident);
            const ValidityClass want = sym.symbol == Symbol::C   ? ValidityClass::Pending
                                       : sym.symbol == Symbol::O ? ValidityClass::Overdraft
                                                                 : ValidityClass::LatentOverdraft;
            if (c != want) return std::nullopt;
            if (sym.symbol == Symbol::L && P.latent_evict_guard &&
                guard_blocks(pool, pool.slot_classes(), high))
                return std::nullopt;
            return tx;
        }
        case Symbol::N:
        case Symbol::E: return std::nullopt;
    }
    return std::nullopt;
}

std::vector<SymbolizedTx> enumerate_mutations(const Execution& e) {
    std::vector<SymbolizedTx> out;
    size_t resident_parents = 0;
    for (const auto& s : e.pool.slots)
        if (s.tx.sender.role == Role::Adversarial && is_parent(s.tx, e.pool) && s.tx.value == 1)
            ++resident_parents;
    for (uint32_t v = 0; v <= resident_parents; ++v) {
        SymbolizedTx s{Symbol::P, v, resident_parents == 0};
        if (instantiate(s, e)) out.push_back(s);
    }
    const auto groups = static_cast<uint32_t>(sender_groups(e.pool).size());
    for (Symbol sym : {Symbol::L, Symbol::C, Symbol::O, Symbol::R})
        for (uint32_t v = 1; v <= groups; ++v) {
            SymbolizedTx s{sym, v, false};
            if (instantiate(s, e)) out.push_back(s);
        }
    SymbolizedTx f{Symbol::F, 0, false};
    if (instantiate(f, e)) out.push_back(f);
    return out;
}

std::optional<AdmissionOutcome> apply(Execution& e, const SymbolizedTx& sym) {
    auto tx = instantiate(sym, e);
    if (!tx) return std::nullopt;
    if (tx->sender.role == Role::Adversarial && tx->sender.index >= e.ctx.next_adversary)
        e.ctx.next_adversary = tx->sender.index + 1;
    if (sym.symbol == Symbol::P)
        e.ctx.p_keys.insert(std::lower_bound(e.ctx.p_keys.begin(), e.ctx.p_keys.end(), tx->gas_price),
                            tx->gas_price);
    e.history.push_back(*tx);
    return admit_in_place(e.pool, *tx);
}

AdmissionOutcome apply_normal(Execution& e) {
    e.history.push_back(normal_tx(e.pool, 3 * kKeyScale));
    return admit_in_place(e.pool, e.history.back());
}

std::optional<Execution> execute(const MempoolPolicy& policy, const SymbolizedInput& in, bool filled) {
    Execution e = filled ? start_filled(policy) : start_empty(policy);
    for (const auto& s : in)
        if (!apply(e, s)) return std::nullopt;
    return e;
}

Transaction report_tx(const Transaction& tx, const InstContext& ctx) {
    Transaction t = tx;
    t.gas_price = p_rank_price(tx.gas_price, &ctx);
    return t;
}

}  // namespace mpfuzz
