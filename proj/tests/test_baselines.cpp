#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "mpfuzz/baselines.hpp"

using namespace mpfuzz;

namespace {

const MempoolPolicy kPool = policy_preset("geth-legacy-reduced(6)");

FuzzConfig deter(uint64_t budget = 100000) {
    FuzzConfig c;
    c.mode = OracleMode::DeterInvalid;
    c.stop_at_first = true;
    c.max_mutations = budget;
    c.max_seconds = 60;
    return c;
}

void check_deter_shape(const Exploit& x) {
    // N-filled start, full damage, one chargeable adversarial tx left
    REQUIRE(x.concrete_txs.size() > kPool.m);
    for (uint32_t i = 0; i < kPool.m; ++i) CHECK(x.concrete_txs[i].sender.role == Role::Benign);
    CHECK(x.verdict.triggered);
    CHECK(x.end_state.find('N') == std::string::npos);
    const auto pending = std::count(x.end_state.begin(), x.end_state.end(), 'P') +
                         std::count(x.end_state.begin(), x.end_state.end(), 'R') +
                         std::count(x.end_state.begin(), x.end_state.end(), 'C');
    CHECK(pending == 1);
    CHECK(x.end_state.find('L') != std::string::npos);
}

}  // namespace

TEST_CASE("grid covers m^4 distinct adversarial txs") {
    for (uint32_t m : {2u, 3u, 6u}) {
        const auto g = concrete_grid(m);
        CHECK(g.size() == static_cast<size_t>(m) * m * m * m);
        std::set<std::tuple<uint32_t, uint64_t, int64_t, int64_t>> seen;
        for (const auto& t : g) {
            CHECK(t.sender.role == Role::Adversarial);
            CHECK(t.gas_price >= 4);
            CHECK(t.gas_price <= m + 3);
            CHECK(t.nonce <= m);
            seen.insert({t.sender.index, t.nonce, t.value, t.gas_price});
        }
        CHECK(seen.size() == g.size());
    }
}

TEST_CASE("state key ignores slot storage order") {
    std::mt19937_64 rng(3);
    auto s = new_pool(kPool, WorldState::for_capacity(kPool.m));
    s = fill_normal(s, 3);
    admit_in_place(s, {{Role::Adversarial, 2}, 1, 1, 5});
    admit_in_place(s, {{Role::Adversarial, 1}, 4, 1, 7});
    const auto key = concrete_state_key(s);
    for (int i = 0; i < 1000; ++i) {
        auto t = s;
        std::shuffle(t.slots.begin(), t.slots.end(), rng);
        REQUIRE(concrete_state_key(t) == key);
    }
    auto u = s;
    admit_in_place(u, {{Role::Adversarial, 3}, 1, 1, 9});
    CHECK(concrete_state_key(u) != key);
}

TEST_CASE("names") {
    for (auto k : {BaselineKind::B1_Stateless, BaselineKind::B2_ConcreteCoverage, BaselineKind::B3_InvalidTxEnergy,
                   BaselineKind::B4_NoPromising})
        CHECK(baseline_from(to_string(k)) == k);
    CHECK(baseline_from("B3") == BaselineKind::B3_InvalidTxEnergy);
    CHECK_THROWS(baseline_from("B5"));
}

TEST_CASE("B4 reaches the deterministic-invalid target quickly") {
    const auto r = run_baseline(BaselineKind::B4_NoPromising, kPool, deter());
    REQUIRE(r.exploits.size() == 1);
    CHECK(r.first_exploit_at <= 1000);
    check_deter_shape(r.exploits[0]);
}

TEST_CASE("B3 and B1 reach it, B2 respects its budget") {
    const auto b3 = run_baseline(BaselineKind::B3_InvalidTxEnergy, kPool, deter());
    REQUIRE(b3.exploits.size() == 1);
    check_deter_shape(b3.exploits[0]);

    const auto b1 = run_baseline(BaselineKind::B1_Stateless, kPool, deter());
    REQUIRE(b1.exploits.size() == 1);
    check_deter_shape(b1.exploits[0]);

    const auto b2 = run_baseline(BaselineKind::B2_ConcreteCoverage, kPool, deter(5000));
    CHECK(b2.mutations <= 5000);
    if (b2.exploits.empty()) CHECK(b2.first_exploit_at == 0);
}

TEST_CASE("baselines are deterministic per seed") {
    for (auto k : {BaselineKind::B1_Stateless, BaselineKind::B3_InvalidTxEnergy}) {
        auto c = deter();
        c.rng_seed = 17;
        const auto a = run_baseline(k, kPool, c);
        const auto b = run_baseline(k, kPool, c);
        CHECK(a.first_exploit_at == b.first_exploit_at);
        REQUIRE(a.exploits.size() == b.exploits.size());
        if (!a.exploits.empty()) CHECK(a.exploits[0].concrete_txs == b.exploits[0].concrete_txs);
    }
}
