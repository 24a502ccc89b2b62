#include "mpfuzz/exploitkit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace mpfuzz {

std::string to_string(Pattern p) { return "XT" + std::to_string(static_cast<int>(p)); }

Pattern pattern_from(const std::string& s) {
    if (s.size() == 3 && (s[0] == 'X' || s[0] == 'x') && (s[1] == 'T' || s[1] == 't') && s[2] >= '1' &&
        s[2] <= '9')
        return static_cast<Pattern>(s[2] - '0');
    throw std::invalid_argument("unknown pattern: " + s);
}

std::vector<Pattern> all_patterns() {
    std::vector<Pattern> v;
    for (int i = 1; i <= 9; ++i) v.push_back(static_cast<Pattern>(i));
    return v;
}

namespace {

Address adv(uint32_t i) { return Address{Role::Adversarial, i}; }

// Pool tracker used while building schedules that depend on earlier outcomes.
struct Builder {
    XtPlan plan;
    MempoolState pool;
    uint32_t next_sender = 1;
    size_t step_start = 0;

    Builder(const MempoolPolicy& policy, int64_t normal_price, bool filled)
        : pool(new_pool(policy, WorldState::for_capacity(policy.m))) {
        plan.normal_price = normal_price;
        if (filled)
            for (uint32_t i = 0; i < policy.m; ++i) admit_in_place(pool, normal_tx(pool, normal_price));
    }
    uint32_t fresh() { return next_sender++; }
    AdmissionOutcome send(const Transaction& tx, bool must = true) {
        plan.txs.push_back(tx);
        plan.must_admit.push_back(must);
        return admit_in_place(pool, tx);
    }
    void end_step() {
        plan.steps.push_back(plan.txs.size() - step_start);
        step_start = plan.txs.size();
    }
    size_t free_slots() const { return pool.policy.m - pool.slots.size(); }
    XtPlan done() {
        if (plan.txs.size() > step_start) end_step();
        return std::move(plan);
    }
};

int64_t price_or(const XtParams& p, size_t i, int64_t fallback) {
    return i < p.prices.size() && p.prices[i] > 0 ? p.prices[i] : fallback;
}

uint32_t ceil_div(uint32_t a, uint32_t b) { return (a + b - 1) / b; }

XtPlan incompatible(Pattern p, OracleKind kind, std::string why) {
    XtPlan x;
    x.pattern = p;
    x.kind = kind;
    x.compatible = false;
    x.note = std::move(why);
    return x;
}

// k sequences of l txs: parent (value pv, price pp) then children
void chains(Builder& b, uint32_t k, uint32_t l, uint32_t total, int64_t pv, int64_t pp,
            const std::vector<int64_t>& child_values, int64_t cp, std::vector<uint32_t>* senders) {
    uint32_t sent = 0;
    for (uint32_t s = 0; s < k && sent < total; ++s) {
        const uint32_t who = b.fresh();
        if (senders) senders->push_back(who);
        for (uint32_t j = 0; j < l && sent < total; ++j, ++sent) {
            const int64_t v = j == 0 ? pv : child_values[std::min<size_t>(j - 1, child_values.size() - 1)];
            b.send(Transaction{adv(who), j + 1, v, j == 0 ? pp : cp});
        }
    }
}

}  // namespace

XtPlan generate_xt(Pattern pat, const MempoolPolicy& P, const XtParams& prm) {
    const uint32_t m = P.m;
    const int64_t S = prm.scale > 0 ? prm.scale
                      : (pat == Pattern::XT7 || pat == Pattern::XT8 || pat == Pattern::XT9) ? 100
                                                                                              : 1;
    const int64_t n = 3 * S;
    const int64_t high = static_cast<int64_t>(m + 4) * S;
    const uint32_t seq_len = std::min(prm.l ? prm.l : P.py2, m);

    switch (pat) {
        case Pattern::XT1: {
            Builder b(P, n, true);
            for (uint32_t i = 0; i < m; ++i)
                b.send(Transaction{adv(b.fresh()), uint64_t{m} + 1, 1, price_or(prm, 0, high)});
            auto x = b.done();
            x.pattern = pat;
            return x;
        }
        case Pattern::XT2: {
            if (seq_len < 2) return incompatible(pat, OracleKind::Eviction, "per-sender limit below 2");
            Builder b(P, n, true);
            const uint32_t k = prm.k ? prm.k : ceil_div(m, seq_len);
            chains(b, k, seq_len, m, 1, price_or(prm, 0, 4 * S), {static_cast<int64_t>(m)},
                   price_or(prm, 1, high), nullptr);
            auto x = b.done();
            x.pattern = pat;
            return x;
        }
        case Pattern::XT3: {
            // futures first until the pool's executable count sits at py3, then one latent chain
            if (P.py3 >= m) return incompatible(pat, OracleKind::Eviction, "py3 >= m: no trigger to dodge");
            const uint32_t f = m - P.py3;
            if (m - f < 2) return incompatible(pat, OracleKind::Eviction, "py3 leaves no room for a chain");
            Builder b(P, n, true);
            for (uint32_t i = 0; i < f; ++i)
                b.send(Transaction{adv(b.fresh()), uint64_t{m} + 1, 1, price_or(prm, 2, high)});
            b.end_step();
            chains(b, 1, m - f, m - f, 1, price_or(prm, 0, 4 * S), {static_cast<int64_t>(m)},
                   price_or(prm, 1, high), nullptr);
            auto x = b.done();
            x.pattern = pat;
            return x;
        }
        case Pattern::XT4: {
            // step 1: valid chains, parent value 0 and first child value 2;
            // step 2: replace each parent with value m-1 so 2 + (m-1) > m
            if (seq_len < 2) return incompatible(pat, OracleKind::Eviction, "per-sender limit below 2");
            Builder b(P, n, true);
            const uint32_t k = prm.k ? prm.k : ceil_div(m, seq_len);
            std::vector<uint32_t> senders;
            const int64_t p1 = price_or(prm, 0, 4 * S);
            chains(b, k, seq_len, m, 0, p1, {2, 1}, price_or(prm, 1, high), &senders);
            b.end_step();
            for (uint32_t who : senders)
                b.send(Transaction{adv(who), 1, static_cast<int64_t>(m) - 1, price_or(prm, 2, p1 + S)});
            auto x = b.done();
            x.pattern = pat;
            return x;
        }
        case Pattern::XT5: {
            // f1 < f' < f2: new senders at f' evict the parents at f1, orphaning children at f2
            Builder b(P, n, true);
            const uint32_t k = prm.k ? prm.k : ceil_div(m, seq_len);
            std::vector<uint32_t> senders;
            const int64_t f1 = price_or(prm, 0, 4 * S);
            chains(b, k, seq_len, m, 1, f1, {1}, price_or(prm, 1, high), &senders);
            b.end_step();
            std::map<uint32_t, uint64_t> top;
            for (const auto& s : b.pool.slots)
                if (s.tx.sender.role == Role::Adversarial)
                    top[s.tx.sender.index] = std::max(top[s.tx.sender.index], s.tx.nonce);
            for (size_t i = 0; i < senders.size(); ++i) {
                // slots freed by future-quota overflow are refilled with the next victim's children
                if (i > 0) {
                    const uint32_t who = senders[i];
                    for (size_t fill = b.free_slots(); fill > 0; --fill)
                        b.send(Transaction{adv(who), ++top[who], 1, price_or(prm, 1, high)});
                }
                b.send(Transaction{adv(b.fresh()), 1, 1, price_or(prm, 2, f1 + S)});
            }
            auto x = b.done();
            x.pattern = pat;
            return x;
        }
        case Pattern::XT6: {
            if (P.py3 >= m) return incompatible(pat, OracleKind::Eviction, "py3 >= m: no trigger to dodge");
            if (P.py3 < 2) return incompatible(pat, OracleKind::Eviction, "py3 too small for a step-3 chain");
            Builder b(P, n, true);
            const int64_t p1 = price_or(prm, 0, 4 * S);
            const int64_t p2 = price_or(prm, 2, p1 + S);
            const int64_t p4 = price_or(prm, 3, p2 + S);
            // step 1: m/py2 sequences of py2
            const uint32_t k = prm.k ? prm.k : ceil_div(m, seq_len);
            chains(b, k, seq_len, m, 1, p1, {1}, price_or(prm, 1, high), nullptr);
            b.end_step();
            // step 2: py1/py2 + 1 parents evicted, their children fill the future quota
            const uint32_t k2 = std::min(P.py1 / seq_len + 1, k - 1);
            for (uint32_t i = 0; i < k2; ++i) b.send(Transaction{adv(b.fresh()), 1, 1, p2});
            b.end_step();
            // step 3: one sender, up to py3 txs, parent at f' and children just above it;
            // stops before a tx the pool declines or that would evict the chain's own parent
            const uint32_t s3 = b.fresh();
            for (uint32_t j = 0; j < P.py3; ++j) {
                const Transaction t{adv(s3), j + 1, 1, j == 0 ? p2 : p4};
                const auto trial = admit(b.pool, t).second;
                const bool own = std::any_of(trial.evicted.begin(), trial.evicted.end(),
                                             [&](const Transaction& e) { return e.sender == t.sender; });
                if (!trial.admitted() || own) break;
                b.send(t);
            }
            b.end_step();
            // step 4: evict the step-3 parent
            b.send(Transaction{adv(b.fresh()), 1, 1, p4});
            auto x = b.done();
            x.pattern = pat;
            return x;
        }
        case Pattern::XT7: {
            // sacrificial future, cheap parent that evicts it, children at f2, then
            // m-1 new senders slightly above f1 evicting the children one by one
            Builder b(P, n, true);
            const int64_t f1 = price_or(prm, 0, S);
            const int64_t f2 = price_or(prm, 1, high);
            const int64_t fp = price_or(prm, 2, f1 + (7 * S) / 100);
            b.send(Transaction{adv(b.fresh()), 2, 1, f2});
            b.end_step();
            const uint32_t a = b.fresh();
            b.send(Transaction{adv(a), 1, 1, f1});
            for (uint32_t j = 2; j <= m; ++j) b.send(Transaction{adv(a), j, 1, f2});
            b.end_step();
            for (uint32_t j = 1; j < m; ++j) b.send(Transaction{adv(b.fresh()), 1, 1, fp});
            auto x = b.done();
            x.pattern = pat;
            return x;
        }
        case Pattern::XT8: {
            Builder b(P, n, false);
            for (uint32_t i = 0; i < m; ++i)
                b.send(Transaction{adv(b.fresh()), 1, 1, price_or(prm, 0, S + 2 * S / 100)});
            auto x = b.done();
            x.pattern = pat;
            x.kind = OracleKind::Locking;
            x.probes = m;
            return x;
        }
        case Pattern::XT9: {
            if (P.eviction_rule == EvictionRule::None)
                return incompatible(pat, OracleKind::Locking, "no eviction: the pool locks without a priced child");
            Builder b(P, n, false);
            const uint32_t a = b.fresh();
            for (uint32_t j = 1; j < m; ++j) b.send(Transaction{adv(a), j, 1, price_or(prm, 0, S)});
            b.send(Transaction{adv(a), m, 1, price_or(prm, 1, 684 * S / 100)});
            auto x = b.done();
            x.pattern = pat;
            x.kind = OracleKind::Locking;
            x.probes = m;
            return x;
        }
    }
    throw std::invalid_argument("unknown pattern");
}

PlanRun run_plan(const XtPlan& plan, const MempoolPolicy& policy, const OracleConfig& cfg) {
    PlanRun r;
    MempoolState pool = new_pool(policy, WorldState::for_capacity(policy.m));
    std::vector<Transaction> st0;
    if (plan.kind == OracleKind::Eviction) {
        for (uint32_t i = 0; i < policy.m; ++i) {
            const Transaction t = normal_tx(pool, plan.normal_price);
            admit_in_place(pool, t);
            st0.push_back(t);
            r.timeline.push_back(t);
        }
    }
    for (size_t i = 0; i < plan.txs.size(); ++i) {
        const auto out = admit_in_place(pool, plan.txs[i]);
        r.timeline.push_back(plan.txs[i]);
        if (!out.admitted() && plan.must_admit[i] && !r.first_refused) r.first_refused = i;
    }
    if (plan.kind == OracleKind::Eviction) {
        r.verdict = check_eviction(st0, pool, cfg);
    } else {
        const size_t d0 = pool.declined.size();
        for (uint32_t i = 0; i < plan.probes; ++i) {
            const Transaction t = normal_tx(pool, plan.normal_price);
            admit_in_place(pool, t);
            r.timeline.push_back(t);
        }
        std::vector<Transaction> stn, dcn;
        for (const auto& s : pool.slots) stn.push_back(s.tx);
        for (size_t i = d0; i < pool.declined.size(); ++i) dcn.push_back(pool.declined[i].tx);
        r.verdict = check_locking(stn, chargeable(pool), dcn, cfg);
    }
    r.end = std::move(pool);
    r.success = plan.compatible && !r.first_refused && r.verdict.triggered;
    return r;
}

Exploit to_exploit(const XtPlan& plan, const PlanRun& run, const MempoolPolicy& policy) {
    Exploit x;
    x.kind = plan.kind;
    x.pattern = to_string(plan.pattern);
    x.mut_config = policy;
    x.concrete_txs = run.timeline;
    x.verdict = run.verdict;
    return x;
}

namespace {

struct Row {
    const char* preset;
    std::array<bool, 9> present;
};

// XT1 .. XT9
constexpr Row kTable[] = {
    {"geth-1.11", {false, false, false, false, true, true, false, false, false}},
    {"geth-legacy", {true, true, true, true, true, true, false, false, false}},
    {"besu-22.7", {false, true, false, true, false, false, false, false, false}},
    {"besu-legacy", {true, true, false, true, false, false, false, false, false}},
    {"nethermind-1.18", {false, false, false, true, false, false, false, false, false}},
    {"nethermind-legacy", {true, false, false, true, false, false, true, false, false}},
    {"reth-fifo", {false, false, false, false, false, false, false, true, false}},
    {"openethereum", {false, false, false, true, false, false, false, false, true}},
};

}  // namespace

bool expected_present(Pattern p, const std::string& preset) {
    for (const auto& r : kTable)
        if (preset == r.preset) return r.present[static_cast<int>(p) - 1];
    throw std::invalid_argument("no matrix row for preset " + preset);
}

MempoolPolicy matrix_policy(const std::string& preset, uint32_t m) {
    const MempoolPolicy full = policy_preset(preset);
    if (full.py2 < full.m || full.py3 < full.m) {
        // sender-limited presets keep two sequences per pool and py3 at 5/6 of m
        const uint32_t py2 = std::max<uint32_t>(2, m / 2);
        const uint32_t py3 = static_cast<uint32_t>(uint64_t{full.py3} * m / full.m);
        const uint32_t py1 = full.py1 == full.m
                                 ? m
                                 : std::max<uint32_t>(1, static_cast<uint32_t>(
                                                             (uint64_t{full.py1} * m + full.m - 1) / full.m));
        return policy_preset(preset + "-reduced(" + std::to_string(m) + "," + std::to_string(py1) + "," +
                             std::to_string(py2) + "," + std::to_string(py3) + ")");
    }
    return policy_preset(preset + "-reduced(" + std::to_string(m) + ")");
}

std::vector<MatrixCell> evaluate_matrix(uint32_t m, const OracleConfig& cfg) {
    std::vector<MatrixCell> out;
    for (const auto& r : kTable) {
        const MempoolPolicy pol = matrix_policy(r.preset, m);
        for (Pattern p : all_patterns()) {
            MatrixCell c{p, r.preset, r.present[static_cast<int>(p) - 1], false, {}};
            const XtPlan plan = generate_xt(p, pol);
            if (plan.compatible) {
                const PlanRun run = run_plan(plan, pol, cfg);
                c.observed = run.success;
                c.verdict = run.verdict;
            }
            out.push_back(c);
        }
    }
    return out;
}

std::vector<Exploit> dedup(const std::vector<Exploit>& xs) {
    std::vector<Exploit> out;
    std::set<std::string> seen;
    for (const auto& x : xs) {
        // generated exploits have no symbols; their timeline is the identity
        std::string key = to_string(x.symbol_sequence);
        if (x.symbol_sequence.empty()) key = "@" + x.pattern + "/" + std::to_string(x.concrete_txs.size());
        if (seen.insert(key).second) out.push_back(x);
    }
    return out;
}

namespace {

OracleVerdict timeline_verdict(const MempoolPolicy& policy, OracleKind kind,
                               const std::vector<Transaction>& timeline, const OracleConfig& cfg) {
    MempoolState pool = new_pool(policy, WorldState::for_capacity(policy.m));
    std::vector<Transaction> st0;
    std::optional<size_t> d0;
    for (size_t i = 0; i < timeline.size(); ++i) {
        const auto& t = timeline[i];
        if (kind == OracleKind::Eviction && i < policy.m) st0.push_back(t);
        if (kind == OracleKind::Locking && !d0 && t.sender.role == Role::Benign) d0 = pool.declined.size();
        admit_in_place(pool, t);
    }
    if (kind == OracleKind::Eviction) return check_eviction(st0, pool, cfg);
    std::vector<Transaction> stn, dcn;
    for (const auto& s : pool.slots) stn.push_back(s.tx);
    for (size_t i = d0.value_or(pool.declined.size()); i < pool.declined.size(); ++i)
        dcn.push_back(pool.declined[i].tx);
    return check_locking(stn, chargeable(pool), dcn, cfg);
}

std::string outcome_tag(const AdmissionOutcome& o) {
    return o.admitted() ? to_string(o.kind) : "Declined(" + to_string(o.reason) + ")";
}

}  // namespace

OracleVerdict replay_verdict(const Exploit& x, const OracleConfig& cfg) {
    return timeline_verdict(x.mut_config, x.kind, x.concrete_txs, cfg);
}

Extension extend(const Exploit& sx, const MempoolPolicy& target, const OracleConfig& cfg) {
    std::ostringstream trace;
    size_t divergence = 0;
    const bool filled = sx.kind == OracleKind::Eviction;

    if (!sx.symbol_sequence.empty()) {
        // admission events of the short run, one per symbol
        std::vector<bool> short_admits;
        {
            Execution e = filled ? start_filled(sx.mut_config) : start_empty(sx.mut_config);
            for (const auto& sym : sx.symbol_sequence) {
                auto out = apply(e, sym);
                short_admits.push_back(out && out->admitted());
            }
        }
        const size_t r = std::max<size_t>(1, target.m / std::max<uint32_t>(1, sx.mut_config.m));
        trace << "repeat x" << r << " on " << target.name << "\n";
        Execution e = filled ? start_filled(target) : start_empty(target);
        SymbolizedInput in;
        bool diverged = false;
        for (size_t i = 0; i < sx.symbol_sequence.size() && !diverged; ++i) {
            for (size_t j = 0; j < r; ++j) {
                const auto& sym = sx.symbol_sequence[i];
                in.push_back(sym);
                auto out = apply(e, sym);
                const bool admitted = out && out->admitted();
                if (admitted != short_admits[i]) {
                    divergence = in.size() - 1;
                    trace << "diverged at " << divergence << " (" << to_string(sym) << "): "
                          << (out ? outcome_tag(*out) : std::string("infeasible")) << ", short run "
                          << (short_admits[i] ? "admitted" : "declined") << "\n";
                    diverged = true;
                    break;
                }
            }
        }
        if (!diverged) {
            FuzzConfig fc;
            fc.oracle = cfg;
            if (auto x = check_exploit(e, in, filled, fc)) {
                x->pattern = sx.pattern;
                trace << "oracle satisfied, asym " << decimal_string(x->verdict.asym) << "\n";
                return Extension{*x, "repeat", trace.str()};
            }
            divergence = in.size();
            trace << "events matched but the oracle is not satisfied on the target\n";
        }
    }

    if (!sx.pattern.empty()) {
        const Pattern p = pattern_from(sx.pattern);
        const XtPlan plan = generate_xt(p, target);
        trace << "schedule " << sx.pattern << " on " << target.name;
        if (!plan.compatible) {
            trace << ": incompatible (" << plan.note << ")\n";
        } else {
            const PlanRun run = run_plan(plan, target, cfg);
            if (run.success) {
                trace << ": oracle satisfied, asym " << decimal_string(run.verdict.asym) << "\n";
                return Extension{to_exploit(plan, run, target), "schedule", trace.str()};
            }
            if (run.first_refused) trace << ": step tx " << *run.first_refused << " declined";
            trace << ": oracle " << (run.verdict.triggered ? "satisfied" : "not satisfied") << "\n";
        }
    }
    throw ExtensionFailed("extension failed for " + sx.pattern + " on " + target.name, trace.str(), divergence);
}

int64_t base_price_step(int64_t bp, int64_t gas_used, int64_t block_limit) {
    if (bp < 0 || block_limit <= 0 || gas_used < 0 || gas_used > block_limit)
        throw std::invalid_argument("base_price_step: need bp >= 0 and 0 <= gas_used <= block_limit");
    // bp * (7/8 + gas/(4 limit)) = bp * (7 limit + 2 gas) / (8 limit), rounded half up
    const __int128 num = static_cast<__int128>(bp) * (7 * static_cast<__int128>(block_limit) + 2 * gas_used);
    const __int128 den = 8 * static_cast<__int128>(block_limit);
    const __int128 q = (2 * num + den) / (2 * den);
    return std::max<int64_t>(1, static_cast<int64_t>(q));
}

namespace {

struct Arrivals {
    std::mt19937_64 rng;
    const WorkloadSpec& w;
    uint32_t next_sender = 1;
    explicit Arrivals(const WorkloadSpec& spec) : rng(spec.rng_seed), w(spec) {}

    std::vector<Transaction> block(uint32_t count, int64_t base) {
        std::vector<Transaction> out;
        const uint32_t per = std::max<uint32_t>(1, w.txs_per_sender);
        while (out.size() < count) {
            const Address a{Role::Benign, next_sender++};
            int64_t price = base;
            if (w.price_spread > 0)
                price += std::uniform_int_distribution<int64_t>(0, w.price_spread)(rng);
            for (uint32_t k = 1; k <= per && out.size() < count; ++k) out.push_back(Transaction{a, k, 1, price});
        }
        return out;
    }
};

long double fees(const std::vector<Transaction>& txs, Role role) {
    long double f = 0;
    for (const auto& t : txs)
        if (t.sender.role == role) f += static_cast<long double>(t.gas_price) * kTxGas;
    return f;
}

// resend an attack tx relative to what the chain already confirmed for its sender
void inject(MempoolState& pool, const std::vector<Transaction>& attack, int64_t min_price = 0) {
    for (Transaction t : attack) {
        auto& acct = pool.world.accounts[t.sender];
        acct.balance = pool.world.adversarial_balance_default;
        t.nonce += acct.confirmed_nonce;
        if (t.gas_price < min_price) continue;
        admit_in_place(pool, t);
    }
}

}  // namespace

ReplayReport replay(const Exploit* x, const MempoolPolicy& policy, const WorkloadSpec& w, uint64_t blocks,
                    double attack_delay) {
    const uint32_t per_block = w.per_block ? w.per_block : std::max<uint32_t>(1, policy.m / 2);
    const uint32_t block_txs = w.block_txs ? w.block_txs : std::max<uint32_t>(1, policy.m / 2);
    const int64_t limit = int64_t{block_txs} * kTxGas;
    std::vector<Transaction> attack;
    if (x)
        for (const auto& t : x->concrete_txs)
            if (t.sender.role == Role::Adversarial) attack.push_back(t);
    const double delay = std::clamp(attack_delay, 0.0, 1.0);

    auto run = [&](bool attacked) {
        ReplayReport r;
        MempoolState pool = new_pool(policy, WorldState::for_capacity(policy.m));
        Arrivals arr(w);
        for (uint64_t b = 0; b < blocks; ++b) {
            const auto txs = arr.block(per_block, w.price);
            const size_t before = attacked ? static_cast<size_t>(std::llround(delay * txs.size())) : txs.size();
            for (size_t i = 0; i < before; ++i) admit_in_place(pool, txs[i]);
            if (attacked) inject(pool, attack);
            for (size_t i = before; i < txs.size(); ++i) admit_in_place(pool, txs[i]);
            auto [included, next] = build_block(pool, limit);
            pool = std::move(next);
            BlockRecord rec;
            rec.block = b;
            rec.benign_fees = fees(included, Role::Benign);
            rec.adversarial_fees = fees(included, Role::Adversarial);
            rec.gas_used = static_cast<int64_t>(included.size()) * kTxGas;
            rec.gas_limit = limit;
            r.series.push_back(rec);
        }
        return r;
    };

    ReplayReport base = run(false);
    ReplayReport r = attack.empty() ? base : run(true);
    long double benign = 0, benign0 = 0, adv = 0;
    for (const auto& rec : r.series) benign += rec.benign_fees, adv += rec.adversarial_fees;
    for (const auto& rec : base.series) benign0 += rec.benign_fees;
    r.blocks = blocks;
    r.success_rate = benign0 > 0 ? std::clamp(1 - benign / benign0, 0.0L, 1.0L) : 0;
    r.cost_per_block = blocks ? adv / blocks : 0;
    r.benign_fees_per_block = blocks ? benign / blocks : 0;
    r.asym = x ? x->verdict.asym : 0;
    return r;
}

ReplayReport simulate_xt8a(const MempoolPolicy& policy, const WorkloadSpec& w, uint64_t eviction_blocks,
                           int64_t lock_price, int64_t bp0, uint64_t lock_blocks) {
    const uint32_t m = policy.m;
    const uint32_t per_block = w.per_block ? w.per_block : std::max<uint32_t>(1, m / 2);
    const uint32_t block_txs = w.block_txs ? w.block_txs : std::max<uint32_t>(1, m / 2);
    const int64_t limit = int64_t{block_txs} * kTxGas;

    // eviction rounds keep the pool full of futures, so blocks come out empty
    std::vector<Transaction> futures, lockers;
    for (uint32_t i = 1; i <= m; ++i) futures.push_back(Transaction{{Role::Adversarial, i}, 2, 1, 4 * bp0});
    for (uint32_t i = 1; i <= m; ++i) lockers.push_back(Transaction{{Role::Adversarial, m + i}, 1, 1, lock_price});

    auto run = [&](bool attacked) {
        ReplayReport r;
        MempoolState pool = new_pool(policy, WorldState::for_capacity(m));
        Arrivals arr(w);
        int64_t bp = bp0;
        for (uint64_t b = 0; b < eviction_blocks + lock_blocks; ++b) {
            const bool evicting = b < eviction_blocks;
            if (attacked && b == eviction_blocks) {
                // queued futures expire before the lock starts
                const auto cls = pool.slot_classes();
                std::vector<Slot> keep;
                for (size_t i = 0; i < pool.slots.size(); ++i)
                    if (cls[i] != ValidityClass::Future) keep.push_back(pool.slots[i]);
                pool.slots = std::move(keep);
                if (lock_price < bp) {
                    r.feasible = false;
                    r.note = "lock price " + std::to_string(lock_price) + " below base price " + std::to_string(bp);
                }
            }
            if (attacked) inject(pool, evicting ? futures : lockers, bp);
            // benign senders bid twice the current base price
            for (const auto& t : arr.block(per_block, 2 * bp + w.price)) admit_in_place(pool, t);
            // txs priced under the base price cannot be included
            MempoolState eligible = pool;
            std::vector<Slot> under;
            {
                std::vector<Slot> keep;
                for (const auto& s : eligible.slots) (s.tx.gas_price >= bp ? keep : under).push_back(s);
                eligible.slots = std::move(keep);
            }
            auto [included, next] = build_block(eligible, limit);
            pool = std::move(next);
            for (const auto& s : under) pool.slots.push_back(s);
            BlockRecord rec;
            rec.block = b;
            rec.base_price = bp;
            rec.benign_fees = fees(included, Role::Benign);
            rec.adversarial_fees = fees(included, Role::Adversarial);
            rec.gas_used = static_cast<int64_t>(included.size()) * kTxGas;
            rec.gas_limit = limit;
            r.series.push_back(rec);
            bp = base_price_step(bp, rec.gas_used, limit);
        }
        return r;
    };

    ReplayReport base = run(false);
    ReplayReport r = run(true);
    long double benign = 0, benign0 = 0, adv = 0;
    for (uint64_t b = eviction_blocks; b < r.series.size(); ++b) {
        benign += r.series[b].benign_fees;
        benign0 += base.series[b].benign_fees;
        adv += r.series[b].adversarial_fees;
    }
    r.blocks = r.series.size();
    r.success_rate = benign0 > 0 ? std::clamp(1 - benign / benign0, 0.0L, 1.0L) : 0;
    r.cost_per_block = lock_blocks ? adv / lock_blocks : 0;
    r.benign_fees_per_block = lock_blocks ? benign / lock_blocks : 0;
    return r;
}

nlohmann::ordered_json exploit_to_json(const Exploit& x) {
    nlohmann::ordered_json txs = nlohmann::ordered_json::array();
    for (const auto& t : x.concrete_txs) txs.push_back(t);
    return {
        {"version", 1},
        {"kind", to_string(x.kind)},
        {"pattern", x.pattern},
        {"mut_config", policy_to_json(x.mut_config)},
        {"symbol_sequence", to_string(x.symbol_sequence)},
        {"concrete_txs", txs},
        {"verdict", verdict_to_json(x.verdict)},
        {"end_state", x.end_state},
        {"found_at", x.found_at},
    };
}

Exploit exploit_from_json(const nlohmann::ordered_json& j) {
    for (const char* k : {"version", "kind", "mut_config", "symbol_sequence", "concrete_txs", "verdict"})
        if (!j.contains(k)) throw std::invalid_argument(std::string("exploit file: missing ") + k);
    if (j["version"] != 1) throw std::invalid_argument("exploit file: unsupported version");
    Exploit x;
    try {
        const auto kind = j["kind"].get<std::string>();
        if (kind == "Eviction") x.kind = OracleKind::Eviction;
        else if (kind == "Locking") x.kind = OracleKind::Locking;
        else throw std::invalid_argument("exploit file: bad kind " + kind);
        x.pattern = j.value("pattern", std::string{});
        x.mut_config = policy_from_json(j["mut_config"], MempoolPolicy{});
        x.symbol_sequence = parse_input(j["symbol_sequence"].get<std::string>());
        for (const auto& t : j["concrete_txs"]) x.concrete_txs.push_back(t.get<Transaction>());
        x.verdict = verdict_from_json(j["verdict"]);
        x.end_state = j.value("end_state", std::string{});
        x.found_at = j.value("found_at", uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("exploit file: ") + e.what());
    }
    return x;
}

nlohmann::ordered_json report_to_json(const ReplayReport& r) {
    nlohmann::ordered_json series = nlohmann::ordered_json::array();
    for (const auto& b : r.series)
        series.push_back({{"block", b.block},
                          {"base_price", b.base_price},
                          {"benign_fees", decimal_string(b.benign_fees)},
                          {"adversarial_fees", decimal_string(b.adversarial_fees)},
                          {"gas_used", b.gas_used},
                          {"gas_limit", b.gas_limit}});
    return {
        {"success_rate", decimal_string(r.success_rate)},
        {"cost_per_block", decimal_string(r.cost_per_block)},
        {"benign_fees_per_block", decimal_string(r.benign_fees_per_block)},
        {"asym", decimal_string(r.asym)},
        {"blocks", r.blocks},
        {"feasible", r.feasible},
        {"note", r.note},
        {"series", series},
    };
}

std::string report_csv(const ReplayReport& r) {
    std::ostringstream o;
    o << "block,base_price,benign_fees,adversarial_fees,gas_used,gas_limit\n";
    for (const auto& b : r.series)
        o << b.block << ',' << b.base_price << ',' << decimal_string(b.benign_fees) << ','
          << decimal_string(b.adversarial_fees) << ',' << b.gas_used << ',' << b.gas_limit << '\n';
    return o.str();
}

}  // namespace mpfuzz
