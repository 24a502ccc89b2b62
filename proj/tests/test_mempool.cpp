#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "mpfuzz/mempool.hpp"
#include "mpfuzz/symbolic.hpp"

using namespace mpfuzz;

namespace {

Address A(uint32_t i) { return {Role::Adversarial, i}; }
Address B(uint32_t i) { return {Role::Benign, i}; }

MempoolState pool_for(const std::string& preset) {
    const auto p = policy_preset(preset);
    return new_pool(p, WorldState::for_capacity(p.m));
}

std::multiset<std::tuple<Address, uint64_t, int64_t, int64_t>> txset(const std::vector<Transaction>& v) {
    std::multiset<std::tuple<Address, uint64_t, int64_t, int64_t>> s;
    for (const auto& t : v) s.insert({t.sender, t.nonce, t.value, t.gas_price});
    return s;
}

std::vector<Transaction> residents(const MempoolState& s) {
    std::vector<Transaction> v;
    for (const auto& sl : s.slots) v.push_back(sl.tx);
    return v;
}

const std::vector<std::string> kReduced = {
    "geth-legacy-reduced(6)",      "geth-1.11-reduced(6,2,3,4)", "nethermind-legacy-reduced(6)",
    "nethermind-1.18-reduced(6)",  "besu-legacy-reduced(6)",     "besu-22.7-reduced(6)",
    "reth-fifo-reduced(6)",        "openethereum-reduced(6)",    "geth-1.11-reduced(3,1,2,2)",
};

Transaction random_tx(std::mt19937_64& rng, uint32_t m) {
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    const Role role = pick(0, 3) == 0 ? Role::Benign : Role::Adversarial;
    return Transaction{{role, static_cast<uint32_t>(pick(1, static_cast<int>(m)))},
                       static_cast<uint64_t>(pick(1, static_cast<int>(m) + 1)), pick(0, static_cast<int>(m) + 1),
                       pick(1, static_cast<int>(m) + 4)};
}

}  // namespace

TEST_CASE("fill_normal") {
    auto s = pool_for("geth-1.11-reduced(3,1,2,2)");
    CHECK(symbolize_state(fill_normal(s, 3)).key() == "NNN");
    CHECK(fill_normal(s, 0) == s);
    CHECK_THROWS_AS(fill_normal(s, 4), std::invalid_argument);

    auto s16 = fill_normal(pool_for("geth-legacy-reduced(16)"), 16);
    int64_t total = 0;
    for (const auto& sl : s16.slots) total += fee(sl.tx);
    CHECK(total == 16 * 3 * 21000);
}

TEST_CASE("policy invariants are enforced") {
    MempoolPolicy p;
    p.m = 3;
    p.py1 = 4;
    p.py2 = 1;
    CHECK_THROWS_AS(new_pool(p, WorldState::for_capacity(3)), std::invalid_argument);
    p.py1 = 3;
    CHECK_NOTHROW(new_pool(p, WorldState::for_capacity(3)));
}

TEST_CASE("geth-legacy accepts m pendings before evicting") {
    auto s = pool_for("geth-legacy");
    for (uint32_t i = 0; i < s.policy.m; ++i)
        REQUIRE(admit_in_place(s, normal_tx(s)).kind == AdmissionOutcome::Kind::AdmittedNoEvict);
    CHECK(s.slots.size() == 6144);
    CHECK(admit_in_place(s, normal_tx(s, 4)).kind == AdmissionOutcome::Kind::AdmittedEvicting);
}

TEST_CASE("presets") {
    const auto g = policy_preset("geth-1.11");
    CHECK(g.m == 6144);
    CHECK(g.py1 == 1024);
    CHECK(g.py2 == 16);
    CHECK(g.py3 == 5120);
    CHECK(g.replacement_overdraft_guard);
    const auto mut = policy_preset("geth-1.11-reduced(3,1,2,2)");
    CHECK(mut.m == 3);
    CHECK(mut.py1 == 1);
    CHECK(mut.py2 == 2);
    CHECK(mut.py3 == 2);
    CHECK(policy_preset("reth-fifo").eviction_rule == EvictionRule::None);
    CHECK(policy_preset("openethereum").eviction_rule == EvictionRule::PriceChildlessOnly);
    CHECK_FALSE(policy_preset("geth-legacy").replacement_overdraft_guard);
    CHECK(policy_preset("nethermind-1.18").reversal_guard);
    CHECK_FALSE(policy_preset("nethermind-legacy").reversal_guard);
    CHECK_THROWS_AS(policy_preset("parity-9"), std::invalid_argument);
    CHECK(preset_names().size() == 8);
    const auto r = policy_preset("geth-legacy-reduced(6)");
    CHECK(r.m == 6);
    CHECK(r.py1 == 6);
    CHECK(r.py2 == 2);
    CHECK(r.py3 == 5);
}

TEST_CASE("policy JSON round-trips") {
    for (const auto& name : preset_names()) {
        const auto p = policy_preset(name);
        CHECK(policy_from_json(policy_to_json(p), MempoolPolicy{}) == p);
    }
}

TEST_CASE("build_block") {
    SUBCASE("three pendings all included") {
        auto s = fill_normal(pool_for("geth-legacy-reduced(6)"), 3);
        auto [blk, next] = build_block(s, 3 * kTxGas);
        CHECK(blk.size() == 3);
        CHECK(next.slots.empty());
    }
    SUBCASE("futures only gives an empty block") {
        auto s = pool_for("geth-legacy-reduced(6)");
        admit_in_place(s, {A(1), 3, 1, 9});
        admit_in_place(s, {A(2), 7, 1, 9});
        auto [blk, next] = build_block(s, 10 * kTxGas);
        CHECK(blk.empty());
        CHECK(next.slots.size() == 2);
    }
    SUBCASE("greedy by price") {
        auto s = pool_for("geth-legacy-reduced(6)");
        for (int64_t p : {5, 3, 4}) admit_in_place(s, normal_tx(s, p));
        auto [blk, next] = build_block(s, 2 * kTxGas);
        std::vector<int64_t> prices;
        for (const auto& t : blk) prices.push_back(t.gas_price);
        CHECK(prices == std::vector<int64_t>{5, 4});
    }
    SUBCASE("nonce order within a sender, world advances") {
        auto s = pool_for("geth-legacy-reduced(6)");
        admit_in_place(s, {A(1), 1, 1, 2});
        admit_in_place(s, {A(1), 2, 1, 9});
        auto [blk, next] = build_block(s, 10 * kTxGas);
        REQUIRE(blk.size() == 2);
        CHECK(blk[0].nonce == 1);
        CHECK(next.world.account(A(1)).confirmed_nonce == 2);
        CHECK(next.world.account(A(1)).balance == 4);
    }
}

TEST_CASE("reversible two-step example") {
    for (const bool guarded : {false, true}) {
        CAPTURE(guarded);
        auto s = pool_for(guarded ? "nethermind-1.18-reduced(2)" : "nethermind-legacy-reduced(2)");
        const Transaction a1{A(1), 1, 1, 1}, b1{A(2), 1, 1, 3}, a2{A(1), 2, 1, 5};
        admit_in_place(s, a1);
        admit_in_place(s, b1);
        const auto initial = txset(residents(s));
        auto out = admit_in_place(s, a2);
        REQUIRE(out.kind == AdmissionOutcome::Kind::AdmittedEvicting);
        CHECK(out.evicted == std::vector<Transaction>{b1});
        out = admit_in_place(s, b1);
        if (guarded) {
            CHECK(out.kind == AdmissionOutcome::Kind::Declined);
            CHECK(out.reason == DeclineReason::ReversalGuard);
        } else {
            CHECK(out.kind == AdmissionOutcome::Kind::AdmittedEvicting);
            CHECK(out.evicted == std::vector<Transaction>{a2});
            CHECK(txset(residents(s)) == initial);
        }
    }
}

TEST_CASE("FIFO pool declines once full") {
    auto s = fill_normal(pool_for("reth-fifo-reduced(4)"), 4);
    auto out = admit_in_place(s, {A(1), 1, 1, 1000});
    CHECK(out.kind == AdmissionOutcome::Kind::Declined);
    CHECK(out.reason == DeclineReason::FullNoVictim);
}

TEST_CASE("replacement needs a strictly higher price") {
    auto s = pool_for("geth-legacy-reduced(6)");
    admit_in_place(s, {A(1), 1, 1, 5});
    auto out = admit_in_place(s, {A(1), 1, 2, 5});
    CHECK(out.reason == DeclineReason::PriceTooLow);
    out = admit_in_place(s, {A(1), 1, 2, 6});
    CHECK(out.kind == AdmissionOutcome::Kind::AdmittedEvicting);
    CHECK(s.slots.size() == 1);
    CHECK(s.slots[0].tx.value == 2);
}

TEST_CASE("overdraft guard blocks a replacement that makes children latent") {
    for (const bool guarded : {false, true}) {
        auto s = pool_for(guarded ? "geth-1.11-reduced(6,2,3,4)" : "geth-legacy-reduced(6)");
        admit_in_place(s, {A(1), 1, 0, 4});
        admit_in_place(s, {A(1), 2, 2, 9});
        auto out = admit_in_place(s, {A(1), 1, 5, 5});
        CHECK(out.admitted() == !guarded);
        if (guarded) CHECK(out.reason == DeclineReason::OverdraftGuard);
        else CHECK(s.slot_classes()[1] == ValidityClass::LatentOverdraft);
    }
}

TEST_CASE("future quota and sender limit on the appendix pool") {
    auto s = fill_normal(pool_for("geth-1.11-reduced(3,1,2,2)"), 2);
    CHECK(admit_in_place(s, {A(1), 4, 1, 7}).admitted());
    auto out = admit_in_place(s, {A(2), 4, 1, 7});
    CHECK(out.reason == DeclineReason::QuotaFuture);

    auto t = pool_for("geth-1.11-reduced(3,1,2,2)");
    admit_in_place(t, {A(1), 1, 1, 5});
    admit_in_place(t, {A(1), 2, 1, 5});
    admit_in_place(t, normal_tx(t));
    // sender has 2 executable, pool has 3 > py3
    out = admit_in_place(t, {A(1), 3, 1, 9});
    CHECK(out.reason == DeclineReason::SenderLimit);
}

TEST_CASE("PriceAny prefers a cheaper future victim") {
    auto s = fill_normal(pool_for("geth-legacy-reduced(3)"), 2);
    admit_in_place(s, {A(1), 5, 1, 4});
    auto out = admit_in_place(s, {A(2), 1, 1, 6});
    REQUIRE(out.kind == AdmissionOutcome::Kind::AdmittedEvicting);
    CHECK(out.evicted[0].sender == A(1));
}

TEST_CASE("evicting a parent demotes children; overflow beyond py1 is evicted") {
    auto s = pool_for("geth-1.11-reduced(4,1,4,4)");
    admit_in_place(s, {A(1), 1, 1, 2});
    admit_in_place(s, {A(1), 2, 1, 9});
    admit_in_place(s, {A(1), 3, 1, 9});
    admit_in_place(s, normal_tx(s, 5));
    auto out = admit_in_place(s, {A(2), 1, 1, 3});
    REQUIRE(out.kind == AdmissionOutcome::Kind::AdmittedEvicting);
    // parent plus one of the two orphans
    CHECK(out.evicted.size() == 2);
    const auto cls = s.slot_classes();
    CHECK(std::count(cls.begin(), cls.end(), ValidityClass::Future) == 1);
}

TEST_CASE("childless-only eviction never takes a parent") {
    auto s = pool_for("openethereum-reduced(2)");
    admit_in_place(s, {A(1), 1, 1, 1});
    admit_in_place(s, {A(1), 2, 1, 50});
    auto out = admit_in_place(s, normal_tx(s, 10));
    CHECK(out.kind == AdmissionOutcome::Kind::Declined);
}

TEST_CASE("property: trichotomy, capacity, uniqueness, quota (10^5 admissions per preset)") {
    for (const auto& name : kReduced) {
        CAPTURE(name);
        std::mt19937_64 rng(std::hash<std::string>{}(name));
        auto s = pool_for(name);
        const uint32_t m = s.policy.m;
        for (int i = 0; i < 100000; ++i) {
            if (i % 500 == 0) s = pool_for(name);
            const Transaction tx = random_tx(rng, m);
            const auto before = residents(s);
            const size_t declined_before = s.declined.size();
            const auto out = admit_in_place(s, tx);
            const auto after = residents(s);
            switch (out.kind) {
                case AdmissionOutcome::Kind::AdmittedNoEvict: {
                    auto expect = txset(before);
                    expect.insert({tx.sender, tx.nonce, tx.value, tx.gas_price});
                    REQUIRE(txset(after) == expect);
                    REQUIRE(out.evicted.empty());
                    break;
                }
                case AdmissionOutcome::Kind::AdmittedEvicting: {
                    auto expect = txset(before);
                    REQUIRE_FALSE(out.evicted.empty());
                    for (const auto& v : out.evicted) {
                        auto it = expect.find({v.sender, v.nonce, v.value, v.gas_price});
                        REQUIRE(it != expect.end());
                        expect.erase(it);
                    }
                    expect.insert({tx.sender, tx.nonce, tx.value, tx.gas_price});
                    REQUIRE(txset(after) == expect);
                    break;
                }
                case AdmissionOutcome::Kind::Declined:
                    REQUIRE(txset(after) == txset(before));
                    REQUIRE(s.declined.size() == declined_before + 1);
                    REQUIRE(s.declined.back().tx == tx);
                    break;
            }
            if (out.admitted()) REQUIRE(s.declined.size() == declined_before);
            REQUIRE(after.size() <= m);
            std::set<std::pair<Address, uint64_t>> keys;
            for (const auto& t : after) REQUIRE(keys.insert({t.sender, t.nonce}).second);
            const auto cls = s.slot_classes();
            REQUIRE(static_cast<uint32_t>(std::count(cls.begin(), cls.end(), ValidityClass::Future)) <=
                    s.policy.py1);
        }
    }
}

TEST_CASE("property: replay determinism (100 sequences per preset, serialized form)") {
    for (const auto& name : kReduced) {
        std::mt19937_64 rng(7);
        for (int seq = 0; seq < 100; ++seq) {
            std::vector<Transaction> txs;
            for (int i = 0; i < 40; ++i) txs.push_back(random_tx(rng, policy_preset(name).m));
            auto a = pool_for(name), b = pool_for(name);
            for (const auto& t : txs) admit_in_place(a, t);
            for (const auto& t : txs) b = admit(b, t).first;
            REQUIRE(state_to_json(a).dump() == state_to_json(b).dump());
        }
    }
}
