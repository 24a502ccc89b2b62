#include "mpfuzz/mempool.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>
#include <stdexcept>

namespace mpfuzz {

void MempoolPolicy::validate() const {
    if (m == 0) throw std::invalid_argument("capacity m must be positive");
    if (py2 == 0) throw std::invalid_argument("py2 must be positive");
    if (py1 > m || py2 > m || py3 > m)
        throw std::invalid_argument("py1, py2, py3 must not exceed m");
}

std::vector<Transaction> MempoolState::resident_of(const Address& a) const {
    std::vector<Transaction> out;
    for (const auto& s : slots)
        if (s.tx.sender == a) out.push_back(s.tx);
    std::sort(out.begin(), out.end(),
              [](const Transaction& x, const Transaction& y) { return x.nonce < y.nonce; });
    return out;
}

namespace {

// per-sender chain walk; classes indexed like slots
std::vector<ValidityClass> classes_of(const std::vector<Slot>& slots, const WorldState& world) {
    std::vector<size_t> idx(slots.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        const auto& x = slots[a].tx;
        const auto& y = slots[b].tx;
        return std::tie(x.sender, x.nonce) < std::tie(y.sender, y.nonce);
    });
    std::vector<ValidityClass> out(slots.size(), ValidityClass::Future);
    for (size_t g = 0; g < idx.size();) {
        const Address addr = slots[idx[g]].tx.sender;
        const AccountState acct = world.account(addr);
        uint64_t expect = acct.confirmed_nonce + 1;
        int64_t spent = 0;
        bool chain = true;
        for (; g < idx.size() && slots[idx[g]].tx.sender == addr; ++g) {
            const size_t i = idx[g];
            const auto& tx = slots[i].tx;
            if (!chain || tx.nonce != expect) {
                chain = false;
                continue;
            }
            ++expect;
            if (tx.value > acct.balance) out[i] = ValidityClass::Overdraft;
            else if (spent + tx.value > acct.balance) out[i] = ValidityClass::LatentOverdraft;
            else out[i] = ValidityClass::Pending;
            spent += tx.value;
        }
    }
    return out;
}

bool executable(ValidityClass c) {
    return c == ValidityClass::Pending || c == ValidityClass::LatentOverdraft ||
           c == ValidityClass::Overdraft;
}

size_t find_slot(const MempoolState& s, const Address& a, uint64_t nonce) {
    for (size_t i = 0; i < s.slots.size(); ++i)
        if (s.slots[i].tx.sender == a && s.slots[i].tx.nonce == nonce) return i;
    return s.slots.size();
}

void insert(MempoolState& s, const Transaction& tx) { s.slots.push_back({tx, s.next_seq++}); }

// turning and future-quota overflow after `victims` left the pool
void after_eviction(MempoolState& s, const std::vector<Transaction>& victims,
                    const Transaction& arrival, std::vector<Transaction>& evicted) {
    if (s.policy.turning_rule == TurningRule::DropDescendants) {
        for (const auto& v : victims) {
            for (size_t i = 0; i < s.slots.size();) {
                const auto& t = s.slots[i].tx;
                if (t.sender == v.sender && t.nonce > v.nonce && !(t == arrival)) {
                    evicted.push_back(t);
                    s.slots.erase(s.slots.begin() + static_cast<long>(i));
                } else {
                    ++i;
                }
            }
        }
    }
    for (;;) {
        auto cls = classes_of(s.slots, s.world);
        size_t futures = std::count(cls.begin(), cls.end(), ValidityClass::Future);
        if (futures <= s.policy.py1) break;
        std::optional<size_t> pick;
        for (size_t i = 0; i < s.slots.size(); ++i) {
            if (cls[i] != ValidityClass::Future || s.slots[i].tx == arrival) continue;
            if (!pick || s.slots[i].tx.gas_price < s.slots[*pick].tx.gas_price ||
                (s.slots[i].tx.gas_price == s.slots[*pick].tx.gas_price &&
                 s.slots[i].seq < s.slots[*pick].seq))
                pick = i;
        }
        if (!pick) break;
        evicted.push_back(s.slots[*pick].tx);
        s.slots.erase(s.slots.begin() + static_cast<long>(*pick));
    }
}

}  // namespace

ValidityClass MempoolState::slot_class(size_t i) const { return classes_of(slots, world).at(i); }

std::vector<ValidityClass> MempoolState::slot_classes() const { return classes_of(slots, world); }

MempoolState new_pool(const MempoolPolicy& policy, const WorldState& world) {
    policy.validate();
    MempoolState s;
    s.policy = policy;
    s.world = world;
    return s;
}

AdmissionOutcome admit_in_place(MempoolState& s, const Transaction& tx) {
    using Kind = AdmissionOutcome::Kind;
    auto decline = [&](DeclineReason r) {
        s.declined.push_back({tx, r});
        return AdmissionOutcome{Kind::Declined, {}, r};
    };
    const MempoolPolicy& P = s.policy;
    const AccountState acct = s.world.account(tx.sender);
    if (tx.nonce <= acct.confirmed_nonce) return decline(DeclineReason::NonceTooLow);

    const auto resident = s.resident_of(tx.sender);
    const ValidityClass cls = classify(tx, s.world, resident);

    if (cls == ValidityClass::Replacement) {
        if (!P.replacement_allowed) return decline(DeclineReason::PriceTooLow);
        size_t at = find_slot(s, tx.sender, tx.nonce);
        Transaction old = s.slots[at].tx;
        if (tx.gas_price <= old.gas_price) return decline(DeclineReason::PriceTooLow);
        if (tx.value > acct.balance) return decline(DeclineReason::Overdraft);
        if (P.replacement_overdraft_guard) {
            std::vector<Slot> trial = s.slots;
            auto before = classes_of(trial, s.world);
            trial[at].tx = tx;
            auto after = classes_of(trial, s.world);
            for (size_t i = 0; i < trial.size(); ++i)
                if (after[i] == ValidityClass::LatentOverdraft &&
                    before[i] != ValidityClass::LatentOverdraft)
                    return decline(DeclineReason::OverdraftGuard);
        }
        s.slots[at] = Slot{tx, s.next_seq++};
        return AdmissionOutcome{Kind::AdmittedEvicting, {old}, {}};
    }
    if (cls == ValidityClass::Overdraft) return decline(DeclineReason::Overdraft);

    const auto classes = classes_of(s.slots, s.world);
    const size_t futures = std::count(classes.begin(), classes.end(), ValidityClass::Future);
    if (cls == ValidityClass::Future && futures >= P.py1) return decline(DeclineReason::QuotaFuture);

    std::vector<Transaction> evicted;
    // the arrival would be the sender's highest nonce, which is what the limit trims
    if (cls == ValidityClass::Pending || cls == ValidityClass::LatentOverdraft) {
        size_t sender_exec = 0, pool_exec = 0;
        for (size_t i = 0; i < s.slots.size(); ++i) {
            if (!executable(classes[i])) continue;
            ++pool_exec;
            if (s.slots[i].tx.sender == tx.sender) ++sender_exec;
        }
        if (sender_exec >= P.py2 && pool_exec > P.py3) return decline(DeclineReason::SenderLimit);
    }

    if (s.slots.size() < P.m) {
        insert(s, tx);
        return AdmissionOutcome{Kind::AdmittedNoEvict, {}, {}};
    }
    if (P.eviction_rule == EvictionRule::None) return decline(DeclineReason::FullNoVictim);

    const bool guarded = (cls == ValidityClass::Future && P.future_evict_guard) ||
                         (cls == ValidityClass::LatentOverdraft && P.latent_evict_guard);
    auto allowed = [&](size_t i) { return !guarded || classes[i] != ValidityClass::Pending; };
    auto cheaper = [&](size_t a, size_t b) {
        const auto& x = s.slots[a];
        const auto& y = s.slots[b];
        return x.tx.gas_price < y.tx.gas_price ||
               (x.tx.gas_price == y.tx.gas_price && x.seq < y.seq);
    };

    std::optional<size_t> victim;
    DeclineReason why = DeclineReason::FullNoVictim;
    bool any_allowed = false;
    for (size_t i = 0; i < s.slots.size(); ++i) any_allowed = any_allowed || allowed(i);
    if (any_allowed) why = DeclineReason::PriceTooLow;

    switch (P.eviction_rule) {
        case EvictionRule::PriceAny: {
            for (size_t i = 0; i < s.slots.size(); ++i)
                if (classes[i] == ValidityClass::Future && allowed(i) &&
                    s.slots[i].tx.gas_price < tx.gas_price && (!victim || cheaper(i, *victim)))
                    victim = i;
            if (!victim)
                for (size_t i = 0; i < s.slots.size(); ++i)
                    if (allowed(i) && s.slots[i].tx.gas_price < tx.gas_price &&
                        (!victim || cheaper(i, *victim)))
                        victim = i;
            break;
        }
        case EvictionRule::PriceChildlessOnly: {
            std::map<Address, size_t> top;
            for (size_t i = 0; i < s.slots.size(); ++i) {
                const auto& t = s.slots[i].tx;
                if (t.sender == tx.sender) continue;
                auto it = top.find(t.sender);
                if (it == top.end() || t.nonce > s.slots[it->second].tx.nonce) top[t.sender] = i;
            }
            for (auto& [a, i] : top)
                if (allowed(i) && s.slots[i].tx.gas_price < tx.gas_price &&
                    (!victim || cheaper(i, *victim)))
                    victim = i;
            break;
        }
        case EvictionRule::AccountMinPrice: {
            struct Acc {
                size_t first = 0, top = 0;
            };
            std::map<Address, Acc> accs;
            for (size_t i = 0; i < s.slots.size(); ++i) {
                const auto& t = s.slots[i].tx;
                if (t.sender == tx.sender) continue;
                auto it = accs.find(t.sender);
                if (it == accs.end()) {
                    accs[t.sender] = {i, i};
                    continue;
                }
                if (t.nonce < s.slots[it->second.first].tx.nonce) it->second.first = i;
                if (t.nonce > s.slots[it->second.top].tx.nonce) it->second.top = i;
            }
            std::optional<std::pair<int64_t, uint64_t>> best;
            std::optional<size_t> best_top;
            for (auto& [a, acc] : accs) {
                if (!allowed(acc.top)) continue;
                const bool gapped = classes[acc.first] == ValidityClass::Future;
                // a future arrival does not displace another gapped account
                if (gapped && cls == ValidityClass::Future) continue;
                int64_t key = gapped
                                  ? 0
                                  : s.slots[acc.first].tx.gas_price;
                std::pair<int64_t, uint64_t> k{key, s.slots[acc.first].seq};
                if (!best || k < *best) {
                    best = k;
                    best_top = acc.top;
                }
            }
            if (best && tx.gas_price > best->first) victim = best_top;
            break;
        }
        case EvictionRule::None: break;
    }
    if (!victim) return decline(why);
    // undoing an earlier eviction, or undercutting what that eviction displaced
    if (P.reversal_guard && s.slots[*victim].displaced >= tx.gas_price)
        return decline(DeclineReason::ReversalGuard);

    Transaction v = s.slots[*victim].tx;
    evicted.push_back(v);
    s.slots.erase(s.slots.begin() + static_cast<long>(*victim));
    insert(s, tx);
    s.slots.back().displaced = v.gas_price;
    after_eviction(s, {v}, tx, evicted);
    return AdmissionOutcome{Kind::AdmittedEvicting, evicted, {}};
}

std::pair<MempoolState, AdmissionOutcome> admit(const MempoolState& state, const Transaction& tx) {
    MempoolState next = state;
    AdmissionOutcome out = admit_in_place(next, tx);
    return {std::move(next), std::move(out)};
}

Transaction normal_tx(MempoolState& state, int64_t price) {
    Address a{Role::Benign, state.next_benign++};
    return Transaction{a, state.world.account(a).confirmed_nonce + 1, 1, price};
}

MempoolState fill_normal(const MempoolState& state, uint32_t k) {
    if (k > state.policy.m) throw std::invalid_argument("fill_normal: k exceeds capacity");
    MempoolState s = state;
    for (uint32_t i = 0; i < k; ++i) {
        auto out = admit_in_place(s, normal_tx(s));
        if (out.kind != AdmissionOutcome::Kind::AdmittedNoEvict)
            throw std::invalid_argument("fill_normal: pool has no room");
    }
    return s;
}

std::pair<std::vector<Transaction>, MempoolState> build_block(const MempoolState& state,
                                                              int64_t block_gas_limit) {
    MempoolState s = state;
    std::vector<Transaction> block;
    int64_t gas = 0;
    while (gas + kTxGas <= block_gas_limit) {
        auto cls = classes_of(s.slots, s.world);
        std::optional<size_t> pick;
        for (size_t i = 0; i < s.slots.size(); ++i) {
            if (cls[i] != ValidityClass::Pending) continue;
            const auto& t = s.slots[i].tx;
            if (t.nonce != s.world.account(t.sender).confirmed_nonce + 1) continue;
            if (!pick || t.gas_price > s.slots[*pick].tx.gas_price ||
                (t.gas_price == s.slots[*pick].tx.gas_price && s.slots[i].seq < s.slots[*pick].seq))
                pick = i;
        }
        if (!pick) break;
        Transaction t = s.slots[*pick].tx;
        s.slots.erase(s.slots.begin() + static_cast<long>(*pick));
        AccountState acct = s.world.account(t.sender);
        acct.confirmed_nonce = t.nonce;
        acct.balance -= t.value;
        s.world.accounts[t.sender] = acct;
        block.push_back(t);
        gas += kTxGas;
    }
    return {std::move(block), std::move(s)};
}

namespace {

struct Base {
    const char* name;
    MempoolPolicy p;
};

MempoolPolicy make(const char* name, uint32_t m, uint32_t py1, uint32_t py2, uint32_t py3,
                   EvictionRule e) {
    MempoolPolicy p;
    p.name = name;
    p.m = m;
    p.py1 = py1;
    p.py2 = py2;
    p.py3 = py3;
    p.eviction_rule = e;
    return p;
}

std::vector<MempoolPolicy> bases() {
    std::vector<MempoolPolicy> v;
    auto geth_legacy = make("geth-legacy", 6144, 6144, 16, 5120, EvictionRule::PriceAny);
    v.push_back(geth_legacy);

    auto geth = make("geth-1.11", 6144, 1024, 16, 5120, EvictionRule::PriceAny);
    geth.replacement_overdraft_guard = true;
    geth.future_evict_guard = true;
    geth.latent_evict_guard = true;
    v.push_back(geth);

    auto nm_legacy = make("nethermind-legacy", 2048, 2048, 2048, 2048, EvictionRule::AccountMinPrice);
    nm_legacy.latent_evict_guard = true;
    v.push_back(nm_legacy);

    auto nm = nm_legacy;
    nm.name = "nethermind-1.18";
    nm.reversal_guard = true;
    nm.future_evict_guard = true;
    v.push_back(nm);

    auto besu_legacy = make("besu-legacy", 4096, 4096, 2048, 0, EvictionRule::AccountMinPrice);
    besu_legacy.reversal_guard = true;
    v.push_back(besu_legacy);

    auto besu = besu_legacy;
    besu.name = "besu-22.7";
    besu.future_evict_guard = true;
    v.push_back(besu);

    auto reth = make("reth-fifo", 10000, 10000, 10000, 10000, EvictionRule::None);
    v.push_back(reth);

    auto oe = make("openethereum", 8192, 8192, 8192, 8192, EvictionRule::PriceChildlessOnly);
    oe.future_evict_guard = true;
    oe.latent_evict_guard = true;
    v.push_back(oe);
    return v;
}

uint32_t scale(uint32_t full_val, uint32_t full_m, uint32_t m, bool up) {
    if (full_val == full_m) return m;
    double x = static_cast<double>(m) * full_val / full_m;
    auto r = static_cast<uint32_t>(up ? std::ceil(x - 1e-9) : std::floor(x + 1e-9));
    return std::min(r, m);
}

}  // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& b : bases()) out.push_back(b.name);
    return out;
}

MempoolPolicy policy_preset(const std::string& name) {
    static const std::regex re(R"(^([a-z0-9.\-]+?)(?:-reduced\((\d+)(?:,(\d+),(\d+),(\d+))?\))?$)");
    std::smatch mt;
    std::string compact;
    for (char c : name)
        if (c != ' ') compact += c;
    if (!std::regex_match(compact, mt, re)) throw std::invalid_argument("unknown preset: " + name);
    const std::string base = mt[1];
    for (auto p : bases()) {
        if (p.name != base) continue;
        if (mt[2].matched) {
            const uint32_t full_m = p.m;
            const uint32_t m = static_cast<uint32_t>(std::stoul(mt[2]));
            if (m == 0) throw std::invalid_argument("reduced capacity must be positive");
            if (mt[3].matched) {
                p.py1 = static_cast<uint32_t>(std::stoul(mt[3]));
                p.py2 = static_cast<uint32_t>(std::stoul(mt[4]));
                p.py3 = static_cast<uint32_t>(std::stoul(mt[5]));
            } else {
                p.py1 = std::max<uint32_t>(1, scale(p.py1, full_m, m, true));
                p.py2 = std::max<uint32_t>(std::min<uint32_t>(2, m), scale(p.py2, full_m, m, false));
                p.py3 = scale(p.py3, full_m, m, false);
            }
            p.m = m;
            p.name = compact;
        }
        p.validate();
        return p;
    }
    throw std::invalid_argument("unknown preset: " + name);
}

std::string to_string(EvictionRule r) {
    switch (r) {
        case EvictionRule::PriceAny: return "PriceAny";
        case EvictionRule::PriceChildlessOnly: return "PriceChildlessOnly";
        case EvictionRule::AccountMinPrice: return "AccountMinPrice";
        case EvictionRule::None: return "None";
    }
    return "?";
}

std::string to_string(TurningRule r) {
    return r == TurningRule::DemoteToFuture ? "DemoteToFuture" : "DropDescendants";
}

std::string to_string(DeclineReason r) {
    switch (r) {
        case DeclineReason::FullNoVictim: return "FullNoVictim";
        case DeclineReason::QuotaFuture: return "QuotaFuture";
        case DeclineReason::SenderLimit: return "SenderLimit";
        case DeclineReason::PriceTooLow: return "PriceTooLow";
        case DeclineReason::OverdraftGuard: return "OverdraftGuard";
        case DeclineReason::ReversalGuard: return "ReversalGuard";
        case DeclineReason::Overdraft: return "Overdraft";
        case DeclineReason::NonceTooLow: return "NonceTooLow";
    }
    return "?";
}

std::string to_string(AdmissionOutcome::Kind k) {
    switch (k) {
        case AdmissionOutcome::Kind::AdmittedNoEvict: return "AdmittedNoEvict";
        case AdmissionOutcome::Kind::AdmittedEvicting: return "AdmittedEvicting";
        case AdmissionOutcome::Kind::Declined: return "Declined";
    }
    return "?";
}

EvictionRule eviction_rule_from(const std::string& s) {
    for (auto r : {EvictionRule::PriceAny, EvictionRule::PriceChildlessOnly,
                   EvictionRule::AccountMinPrice, EvictionRule::None})
        if (to_string(r) == s) return r;
    throw std::invalid_argument("unknown eviction rule: " + s);
}

TurningRule turning_rule_from(const std::string& s) {
    if (s == "DemoteToFuture") return TurningRule::DemoteToFuture;
    if (s == "DropDescendants") return TurningRule::DropDescendants;
    throw std::invalid_argument("unknown turning rule: " + s);
}

nlohmann::ordered_json policy_to_json(const MempoolPolicy& p) {
    return nlohmann::ordered_json{
        {"name", p.name},
        {"m", p.m},
        {"py1", p.py1},
        {"py2", p.py2},
        {"py3", p.py3},
        {"eviction_rule", to_string(p.eviction_rule)},
        {"turning_rule", to_string(p.turning_rule)},
        {"replacement_allowed", p.replacement_allowed},
        {"replacement_overdraft_guard", p.replacement_overdraft_guard},
        {"reversal_guard", p.reversal_guard},
        {"future_evict_guard", p.future_evict_guard},
        {"latent_evict_guard", p.latent_evict_guard},
    };
}

MempoolPolicy policy_from_json(const nlohmann::ordered_json& j, MempoolPolicy p) {
    if (j.contains("name")) p.name = j["name"].get<std::string>();
    if (j.contains("m")) p.m = j["m"].get<uint32_t>();
    if (j.contains("py1")) p.py1 = j["py1"].get<uint32_t>();
    if (j.contains("py2")) p.py2 = j["py2"].get<uint32_t>();
    if (j.contains("py3")) p.py3 = j["py3"].get<uint32_t>();
    if (j.contains("eviction_rule")) p.eviction_rule = eviction_rule_from(j["eviction_rule"]);
    if (j.contains("turning_rule")) p.turning_rule = turning_rule_from(j["turning_rule"]);
    for (auto [key, field] : {std::pair{"replacement_allowed", &p.replacement_allowed},
                              std::pair{"replacement_overdraft_guard", &p.replacement_overdraft_guard},
                              std::pair{"reversal_guard", &p.reversal_guard},
                              std::pair{"future_evict_guard", &p.future_evict_guard},
                              std::pair{"latent_evict_guard", &p.latent_evict_guard}})
        if (j.contains(key)) *field = j[key].get<bool>();
    p.validate();
    return p;
}

nlohmann::ordered_json state_to_json(const MempoolState& s) {
    std::vector<Transaction> txs;
    for (const auto& sl : s.slots) txs.push_back(sl.tx);
    std::sort(txs.begin(), txs.end(), [](const Transaction& a, const Transaction& b) {
        return std::tie(a.sender, a.nonce) < std::tie(b.sender, b.nonce);
    });
    nlohmann::ordered_json j;
    j["policy"] = s.policy.name;
    j["slots"] = txs;
    auto d = nlohmann::ordered_json::array();
    for (const auto& x : s.declined)
        d.push_back(nlohmann::ordered_json{{"tx", x.tx}, {"reason", to_string(x.reason)}});
    j["declined"] = d;
    return j;
}

}  // namespace mpfuzz
