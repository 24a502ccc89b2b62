#include "mpfuzz/fuzzer.hpp"

#include <chrono>
#include <set>
#include <stdexcept>

namespace mpfuzz {

bool operator<(const Energy& a, const Energy& b) {
    const bool ainf = a.den == 0 && a.num > 0;
    const bool binf = b.den == 0 && b.num > 0;
    if (ainf || binf) return !ainf && binf;
    return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
}

bool Seed::exhausted() const {
    for (bool t : tried)
        if (!t) return false;
    return true;
}

Energy energy(const Seed& s) {
    if (s.exhausted()) return {0, 1};
    const int64_t oc = opcost(s.sym);
    if (oc == 0) return {1, 0};
    return {1, oc};
}

bool Corpus::is_covered(const std::string& key) const { return covered_set.count(key) > 0; }

Seed& Corpus::add(Seed s) {
    s.insertion = next_insertion++;
    const std::string key = s.sym.key();
    if (covered_set.insert(key).second) covered.push_back(key);
    seeds.push_back(std::move(s));
    return seeds.back();
}

std::optional<size_t> Corpus::select_next() const {
    std::optional<size_t> best;
    Energy be{0, 1};
    for (size_t i = 0; i < seeds.size(); ++i) {
        Energy e = energy(seeds[i]);
        if (e == Energy{0, 1}) continue;
        if (!best || be < e) {
            best = i;
            be = e;
        }
    }
    return best;
}

bool probe_declined(const Execution& e) {
    Execution copy = e;
    return apply_normal(copy).kind == AdmissionOutcome::Kind::Declined;
}

Seed make_seed(SymbolizedInput input, Execution exec, const MempoolState*) {
    Seed s;
    s.input = std::move(input);
    s.sym = symbolize(exec);
    s.candidates = enumerate_mutations(exec);
    s.tried.assign(s.candidates.size(), false);
    s.probe_declined = probe_declined(exec);
    s.cached = std::move(exec);
    return s;
}

bool st_promising(const SymbolizedState& st_new, const SymbolizedState& st_old, bool filled,
                  bool new_declines_probe, bool old_declines_probe) {
    auto open = [&](const SymbolizedState& s) {
        return filled ? s.count(Symbol::N) : s.count(Symbol::N) + s.count(Symbol::E);
    };
    return open(st_new) < open(st_old) || (new_declines_probe && !old_declines_probe) ||
           cost(st_new) < cost(st_old) || opcost(st_new) < opcost(st_old);
}

std::optional<MutationResult> mutate_exec(Seed& seed, size_t candidate, const MempoolPolicy& policy,
                                          bool filled, bool use_cache) {
    seed.tried.at(candidate) = true;
    std::optional<Execution> exec;
    if (use_cache && seed.cached) exec = *seed.cached;
    else exec = execute(policy, seed.input, filled);
    if (!exec) return std::nullopt;
    const SymbolizedTx& sym = seed.candidates[candidate];
    auto outcome = apply(*exec, sym);
    if (!outcome) return std::nullopt;
    MutationResult r;
    r.input = seed.input;
    r.input.push_back(sym);
    r.sym = symbolize(*exec);
    r.exec = std::move(*exec);
    r.outcome = std::move(*outcome);
    return r;
}

namespace {

MempoolState reported_pool(const Execution& e) {
    MempoolState p = e.pool;
    for (auto& s : p.slots) s.tx = report_tx(s.tx, e.ctx);
    for (auto& d : p.declined) d.tx = report_tx(d.tx, e.ctx);
    return p;
}

}  // namespace

std::optional<Exploit> check_exploit(const Execution& exec, const SymbolizedInput& input, bool filled,
                                     const FuzzConfig& cfg) {
    const MempoolPolicy& policy = exec.pool.policy;
    Exploit x;
    x.mut_config = policy;
    x.symbol_sequence = input;
    if (filled) {
        const MempoolState end = reported_pool(exec);
        std::vector<Transaction> st0;
        for (size_t i = 0; i < policy.m && i < exec.history.size(); ++i)
            st0.push_back(report_tx(exec.history[i], exec.ctx));
        x.kind = OracleKind::Eviction;
        x.verdict = check_eviction(st0, end, cfg.oracle);
        if (cfg.mode == OracleMode::DeterInvalid) {
            const auto cls = end.slot_classes();
            size_t valid = 0, latent = 0;
            for (auto c : cls) {
                valid += c == ValidityClass::Pending;
                latent += c == ValidityClass::LatentOverdraft;
            }
            const bool shape = end.slots.size() == policy.m && valid == 1 && latent > 0 &&
                               chargeable(end).size() == 1;
            x.verdict.triggered = x.verdict.damage_ok && shape;
        }
        if (!x.verdict.triggered) return std::nullopt;
        for (const auto& t : exec.history) x.concrete_txs.push_back(report_tx(t, exec.ctx));
        x.end_state = symbolize(exec).key();
    } else {
        if (cfg.mode != OracleMode::Standard) return std::nullopt;
        Execution probed = exec;
        const size_t d0 = probed.pool.declined.size();
        for (uint32_t i = 0; i < policy.m; ++i) apply_normal(probed);
        const MempoolState end = reported_pool(probed);
        std::vector<Transaction> stn, dcn;
        for (const auto& s : end.slots) stn.push_back(s.tx);
        for (size_t i = d0; i < end.declined.size(); ++i) dcn.push_back(end.declined[i].tx);
        if (stn.empty() || dcn.empty()) return std::nullopt;
        x.kind = OracleKind::Locking;
        const auto ch = chargeable(end);
        x.verdict = check_locking(stn, ch, dcn, cfg.oracle);
        if (!x.verdict.triggered) return std::nullopt;
        for (const auto& t : probed.history) x.concrete_txs.push_back(report_tx(t, probed.ctx));
        x.end_state = symbolize(probed).key();
    }
    x.pattern = guess_pattern(x, symbolize(exec));
    return x;
}

std::string guess_pattern(const Exploit& x, const SymbolizedState& end) {
    auto has = [&](Symbol s) { return end.count(s) > 0; };
    if (x.kind == OracleKind::Locking) return has(Symbol::C) || has(Symbol::L) ? "XT9" : "XT8";
    if (!has(Symbol::P) && !has(Symbol::C) && !has(Symbol::L) && !has(Symbol::R)) {
        for (const auto& s : x.symbol_sequence)
            if (s.symbol != Symbol::F) return "XT6";
        return "XT1";
    }
    if (has(Symbol::R)) return "XT4";
    if (has(Symbol::L)) return has(Symbol::F) ? "XT3" : "XT2";
    return x.mut_config.eviction_rule == EvictionRule::AccountMinPrice ? "XT7" : "XT5";
}

FuzzResult run_mpfuzz(const MempoolPolicy& policy, const FuzzConfig& cfg) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    FuzzResult res;
    std::vector<Corpus> corpora;
    if (cfg.eviction) corpora.push_back(Corpus{true, {}, {}, {}, 0});
    if (cfg.locking) corpora.push_back(Corpus{false, {}, {}, {}, 0});
    for (auto& c : corpora) {
        Execution e = c.filled ? start_filled(policy) : start_empty(policy);
        c.add(make_seed({}, std::move(e)));
    }
    std::set<std::string> emitted;

    auto out_of_budget = [&] {
        if (res.mutations >= cfg.max_mutations) return true;
        return std::chrono::duration<double>(clock::now() - t0).count() >= cfg.max_seconds;
    };
    auto log = [&](const nlohmann::ordered_json& j) {
        if (cfg.log) *cfg.log << j.dump() << '\n';
    };

    bool done = false;
    while (!done) {
        bool any = false;
        for (auto& c : corpora) {
            if (done) break;
            auto pick = c.select_next();
            if (!pick) continue;
            any = true;
            const size_t si = *pick;
            c.seeds[si].selections++;
            for (size_t k = 0; k < c.seeds[si].candidates.size(); ++k) {
                Seed& seed = c.seeds[si];
                if (seed.tried[k]) continue;
                if (out_of_budget()) {
                    done = true;
                    break;
                }
                ++res.mutations;
                if (cfg.use_cache && cfg.audit_every && res.mutations % cfg.audit_every == 0) {
                    auto fresh = execute(policy, seed.input, c.filled);
                    if (!fresh || !(fresh->pool == seed.cached->pool))
                        throw std::logic_error("cached state diverged from re-execution");
                }
                nlohmann::ordered_json line{{"mutation", res.mutations},
                                            {"corpus", c.filled ? "fill" : "empty"},
                                            {"seed", seed.sym.key()},
                                            {"candidate", to_string(seed.candidates[k])}};
                auto r = mutate_exec(seed, k, policy, c.filled, cfg.use_cache);
                if (!r) {
                    line["outcome"] = "Infeasible";
                    log(line);
                    continue;
                }
                line["outcome"] = to_string(r->outcome.kind);
                line["state"] = r->sym.key();
                if (auto x = check_exploit(r->exec, r->input, c.filled, cfg)) {
                    line["exploit"] = true;
                    const std::string key = to_string(x->symbol_sequence);
                    if (emitted.insert(key).second) {
                        x->found_at = res.mutations;
                        if (!res.first_exploit_at) res.first_exploit_at = res.mutations;
                        res.exploits.push_back(std::move(*x));
                    }
                    log(line);
                    if (cfg.stop_at_first) {
                        done = true;
                        break;
                    }
                    continue;
                }
                bool fb = !c.is_covered(r->sym.key());
                if (fb && cfg.promising)
                    fb = st_promising(r->sym, seed.sym, c.filled, probe_declined(r->exec),
                                      seed.probe_declined);
                line["feedback"] = fb;
                log(line);
                if (fb) {
                    res.insertions.push_back(std::string(c.filled ? "fill:" : "empty:") + r->sym.key());
                    c.add(make_seed(std::move(r->input), std::move(r->exec)));
                }
            }
        }
        if (!any) break;
    }
    for (auto& c : corpora) res.covered += c.covered.size();
    return res;
}

}  // namespace mpfuzz
