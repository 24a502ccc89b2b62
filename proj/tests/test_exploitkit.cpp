#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "mpfuzz/exploitkit.hpp"

using namespace mpfuzz;

namespace {

std::set<std::string> succeeding(const MempoolPolicy& p) {
    std::set<std::string> out;
    for (auto x : all_patterns()) {
        auto plan = generate_xt(x, p);
        if (plan.compatible && run_plan(plan, p).success) out.insert(to_string(x));
    }
    return out;
}

Exploit plan_exploit(Pattern x, const MempoolPolicy& p) {
    auto plan = generate_xt(x, p);
    REQUIRE(plan.compatible);
    auto run = run_plan(plan, p);
    REQUIRE(run.success);
    return to_exploit(plan, run, p);
}

const Exploit& golden_xt6() {
    static const Exploit x = [] {
        FuzzConfig c;
        c.oracle.epsilon = 0.0001L;
        c.locking = false;
        for (auto& e : run_mpfuzz(policy_preset("geth-1.11-reduced(3,1,2,2)"), c).exploits)
            if (to_string(e.symbol_sequence) == "P C1 P0 C1 C1") return e;
        throw std::runtime_error("golden exploit missing");
    }();
    return x;
}

const Exploit& fuzzed_xt1() {
    static const Exploit x = [] {
        FuzzConfig c;
        c.locking = false;
        c.stop_at_first = true;
        c.oracle.epsilon = 0.0001L;
        return run_mpfuzz(policy_preset("geth-legacy-reduced(6)"), c).exploits.at(0);
    }();
    return x;
}

}  // namespace

TEST_CASE("XT1 on m=6") {
    const auto p = policy_preset("geth-legacy-reduced(6)");
    const auto plan = generate_xt(Pattern::XT1, p);
    REQUIRE(plan.txs.size() == 6);
    std::set<Address> senders;
    for (const auto& t : plan.txs) {
        CHECK(t.nonce == 7);
        CHECK(t.gas_price == 10);
        senders.insert(t.sender);
    }
    CHECK(senders.size() == 6);
    CHECK(run_plan(plan, p).success);
}

TEST_CASE("XT6 on full geth-1.11 follows the four-step counts") {
    const auto p = policy_preset("geth-1.11");
    const auto plan = generate_xt(Pattern::XT6, p);
    REQUIRE(plan.compatible);
    REQUIRE(plan.steps.size() == 4);
    CHECK(plan.steps[0] / p.py2 == 384);
    CHECK(plan.steps[1] == 65);
    CHECK(plan.steps[2] == 5120);
    CHECK(plan.steps[3] == 1);
}

TEST_CASE("XT4 replacement values overdraw only with the child") {
    const auto p = matrix_policy("nethermind-legacy", 16);
    const auto plan = generate_xt(Pattern::XT4, p);
    const int64_t bal = WorldState::for_capacity(p.m).account({Role::Adversarial, 1}).balance;
    std::map<Address, int64_t> child;
    for (const auto& t : plan.txs)
        if (t.nonce == 2) child[t.sender] = t.value;
    int replacements = 0;
    for (size_t i = 0; i < plan.txs.size(); ++i) {
        const auto& t = plan.txs[i];
        if (t.nonce != 1 || t.value == 0) continue;
        ++replacements;
        CHECK(t.value < bal);
        CHECK(t.value + child.at(t.sender) > bal);
    }
    CHECK(replacements >= 1);
}

TEST_CASE("incompatible pairs are flagged") {
    CHECK_FALSE(generate_xt(Pattern::XT9, matrix_policy("reth-fifo", 16)).compatible);
    CHECK_FALSE(generate_xt(Pattern::XT3, matrix_policy("besu-legacy", 16)).compatible);
    CHECK_THROWS(pattern_from("XT10"));
    CHECK(pattern_from("xt7") == Pattern::XT7);
}

TEST_CASE("pattern x preset matrix at m=16 and m=24") {
    for (uint32_t m : {16u, 24u}) {
        CAPTURE(m);
        const auto cells = evaluate_matrix(m);
        CHECK(cells.size() == 72);
        for (const auto& c : cells) {
            CAPTURE(to_string(c.pattern));
            CAPTURE(c.preset);
            CHECK(c.observed == c.expected);
            CHECK(c.expected == expected_present(c.pattern, c.preset));
        }
    }
}

TEST_CASE("asym values at m=16") {
    const std::vector<std::tuple<Pattern, std::string, double>> rows = {
        {Pattern::XT1, "geth-legacy", 0},          {Pattern::XT1, "nethermind-legacy", 0},
        {Pattern::XT3, "geth-legacy", 0.083},      {Pattern::XT4, "nethermind-legacy", 0.104},
        {Pattern::XT6, "geth-1.11", 0.125},        {Pattern::XT2, "geth-legacy", 0.167},
        {Pattern::XT2, "besu-legacy", 0.167},      {Pattern::XT4, "geth-legacy", 0.208},
        {Pattern::XT5, "geth-legacy", 0.208},      {Pattern::XT4, "besu-legacy", 0.208},
        {Pattern::XT7, "nethermind-legacy", 0.355}, {Pattern::XT8, "reth-fifo", 0.34},
        {Pattern::XT9, "openethereum", 0.46},
    };
    for (const auto& [x, preset, want] : rows) {
        CAPTURE(to_string(x));
        CAPTURE(preset);
        const auto p = matrix_policy(preset, 16);
        const auto run = run_plan(generate_xt(x, p), p);
        CHECK(run.success);
        CHECK(static_cast<double>(run.verdict.asym) == doctest::Approx(want).epsilon(0.012));
    }
}

TEST_CASE("mitigation flags negate their patterns") {
    const auto g = matrix_policy("geth-legacy", 16);
    CHECK(succeeding(g) == std::set<std::string>{"XT1", "XT2", "XT3", "XT4", "XT5", "XT6"});
    auto a = g;
    a.replacement_overdraft_guard = true;
    CHECK_FALSE(succeeding(a).count("XT4"));
    auto b = g;
    b.py3 = 0;
    CHECK_FALSE(succeeding(b).count("XT3"));
    CHECK_FALSE(succeeding(b).count("XT6"));
    auto c = g;
    c.future_evict_guard = true;
    CHECK_FALSE(succeeding(c).count("XT1"));
    CHECK_FALSE(succeeding(c).count("XT3"));
    auto d = g;
    d.latent_evict_guard = true;
    CHECK_FALSE(succeeding(d).count("XT2"));
    CHECK_FALSE(succeeding(d).count("XT3"));
    auto n = matrix_policy("nethermind-legacy", 16);
    CHECK(succeeding(n).count("XT7"));
    n.reversal_guard = true;
    CHECK_FALSE(succeeding(n).count("XT7"));
    auto f = matrix_policy("geth-1.11", 16);
    f.py3 = 0;
    CHECK(succeeding(f).empty());
}

TEST_CASE("property: XT7 end state on nethermind-legacy, m = 4..40") {
    for (uint32_t m = 4; m <= 40; ++m) {
        CAPTURE(m);
        const auto p = matrix_policy("nethermind-legacy", m);
        const auto plan = generate_xt(Pattern::XT7, p);
        const auto run = run_plan(plan, p);
        REQUIRE(run.success);
        REQUIRE(plan.steps.size() == 3);
        const size_t s2 = plan.steps[0] + plan.steps[1];
        const Transaction parent = plan.txs[plan.steps[0]];
        const int64_t step2_price = plan.txs[s2].gas_price;
        CHECK(step2_price > parent.gas_price);
        CHECK(step2_price < parent.gas_price * 11 / 10);
        for (const auto& s : run.end.slots) {
            CHECK(s.tx.sender.role == Role::Adversarial);
            CHECK(s.tx.nonce == 1);
            if (s.tx.sender != parent.sender) CHECK(s.tx.gas_price == step2_price);
        }
    }
}

TEST_CASE("dedup keeps one per symbol string") {
    const auto p = matrix_policy("geth-legacy", 16);
    const auto x1 = plan_exploit(Pattern::XT1, p);
    const auto x2 = plan_exploit(Pattern::XT2, p);
    CHECK(dedup({x1, x1, x2}).size() == 2);
    CHECK(dedup({x1, x2}).size() == 2);

    FuzzConfig c;
    c.oracle.epsilon = 0.0001L;
    const auto pol = policy_preset("geth-1.11-reduced(3,1,2,2)");
    auto strings = [](const std::vector<Exploit>& xs) {
        std::set<std::string> s;
        for (const auto& x : xs) s.insert(to_string(x.symbol_sequence));
        return s;
    };
    const auto a = dedup(run_mpfuzz(pol, c).exploits);
    c.rng_seed = 99;
    const auto b = dedup(run_mpfuzz(pol, c).exploits);
    CHECK(strings(a) == strings(b));
}

TEST_CASE("stored verdicts replay exactly") {
    FuzzConfig c;
    c.max_mutations = 3000;
    const auto r = run_mpfuzz(policy_preset("geth-legacy-reduced(6)"), c);
    REQUIRE_FALSE(r.exploits.empty());
    for (const auto& x : r.exploits) {
        const auto v = replay_verdict(x);
        CHECK(v.triggered == x.verdict.triggered);
        CHECK(v.asym_num == x.verdict.asym_num);
        CHECK(v.asym_den == x.verdict.asym_den);
    }
}

TEST_CASE("extension") {
    SUBCASE("identity target") {
        const auto& x = fuzzed_xt1();
        const auto e = extend(x, x.mut_config);
        CHECK(e.method == "repeat");
        CHECK(e.exploit.verdict.asym_num == x.verdict.asym_num);
        CHECK(e.exploit.concrete_txs.size() == x.concrete_txs.size());
    }
    SUBCASE("XT1 scales by repetition and replays") {
        const auto& x = fuzzed_xt1();
        REQUIRE(to_string(x.symbol_sequence) == "F F F F F F");
        const auto e = extend(x, policy_preset("geth-legacy-reduced(96)"));
        CHECK(e.method == "repeat");
        CHECK(e.exploit.verdict.triggered);
        CHECK(e.exploit.verdict.asym == 0);
        CHECK(classify_tp_fp(x.verdict, e.exploit.verdict, {}) == TpFp::TruePositive);
        const auto v = replay_verdict(e.exploit);
        CHECK(v.asym_num == e.exploit.verdict.asym_num);
        CHECK(v.triggered == e.exploit.verdict.triggered);
    }
    SUBCASE("appendix XT6 to a larger sender-limited pool") {
        const auto e = extend(golden_xt6(), policy_preset("geth-1.11-reduced(48,8,4,40)"));
        CHECK(e.exploit.verdict.triggered);
        CHECK(e.exploit.pattern == "XT6");
        CHECK(replay_verdict(e.exploit).asym_num == e.exploit.verdict.asym_num);
    }
    SUBCASE("py3 = 0 removes the trigger") {
        auto t = policy_preset("geth-1.11-reduced(48,8,4,40)");
        t.py3 = 0;
        try {
            extend(golden_xt6(), t);
            FAIL("extension should diverge");
        } catch (const ExtensionFailed& f) {
            CHECK_FALSE(f.trace.empty());
            CHECK(f.divergence > 0);
        }
    }
}

TEST_CASE("base price recurrence") {
    CHECK(base_price_step(1000, 500, 1000) == 1000);
    CHECK(base_price_step(1000, 0, 1000) == 875);
    CHECK(base_price_step(1000, 1000, 1000) == 1125);
    CHECK(base_price_step(100, 0, 1000) == 88);  // 87.5 rounds up
    CHECK(base_price_step(1, 0, 1000) == 1);
    int64_t bp = 1'000'000'000'000;
    for (int i = 0; i < 35; ++i) bp = base_price_step(bp, 0, 30'000'000);
    CHECK(bp <= 1'000'000'000'000 / 10);
    CHECK(static_cast<double>(bp) == doctest::Approx(1e12 * std::pow(0.875, 35)).epsilon(1e-6));
}

TEST_CASE("property: base price fixed point and monotonicity (10^4 cases)") {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 10000; ++i) {
        const int64_t limit = 2 * std::uniform_int_distribution<int64_t>(1, 15'000'000)(rng);
        const int64_t bp = std::uniform_int_distribution<int64_t>(16, 1'000'000'000'000)(rng);
        const int64_t g = std::uniform_int_distribution<int64_t>(0, limit)(rng);
        const int64_t next = base_price_step(bp, g, limit);
        REQUIRE(next >= 1);
        if (2 * g == limit) REQUIRE(next == bp);
        if (2 * g < limit) REQUIRE(next <= bp);
        if (2 * g > limit) REQUIRE(next >= bp);
        if (g < limit) REQUIRE(base_price_step(bp, g + 1, limit) >= next);
        // closed form, rounded half up
        const long double exact = static_cast<long double>(bp) * (7.0L * limit + 2.0L * g) / (8.0L * limit);
        REQUIRE(std::abs(static_cast<long double>(next) - exact) <= 0.5L + 1e-6L * exact);
    }
    CHECK(base_price_step(800, 0, 1000) < 800);
    CHECK(base_price_step(800, 1000, 1000) > 800);
}

TEST_CASE("replay") {
    WorkloadSpec w;
    SUBCASE("no attack") {
        const auto r = replay(nullptr, matrix_policy("geth-legacy", 16), w, 30);
        CHECK(r.success_rate == 0);
        CHECK(r.cost_per_block == 0);
        CHECK(r.blocks == 30);
    }
    SUBCASE("XT1 on geth-legacy") {
        const auto p = matrix_policy("geth-legacy", 16);
        const auto x = plan_exploit(Pattern::XT1, p);
        const auto r = replay(&x, p, w, 50);
        CHECK(r.success_rate >= 0.99L);
        CHECK(r.success_rate <= 1);
    }
    SUBCASE("XT8 on reth keeps blocks full of attacker txs") {
        const auto p = policy_preset("reth-fifo-reduced(16)");
        const auto x = plan_exploit(Pattern::XT8, p);
        w.price = 300;
        const auto r = replay(&x, p, w, 20);
        CHECK(r.success_rate >= 0.99L);
        CHECK(r.benign_fees_per_block == 0);
        for (size_t b = 3; b < r.series.size(); ++b) CHECK(r.series[b].gas_used == r.series[b].gas_limit);
        CHECK(report_csv(r).find('\n') != std::string::npos);
    }
}

TEST_CASE("XT8a: decay, lock, re-inflation") {
    WorkloadSpec w;
    const auto p = policy_preset("reth-fifo-reduced(16)");
    const int64_t bp0 = 100'000'000'000'000LL;
    const auto r = simulate_xt8a(p, w, 35, bp0 / 5, bp0);
    REQUIRE(r.feasible);
    REQUIRE(r.series.size() > 38);
    CHECK(r.series[35].base_price * 10 <= bp0);
    for (size_t b = 38; b < r.series.size(); ++b) CHECK(r.series[b].benign_fees == 0);
    for (size_t b = 36; b < r.series.size(); ++b) CHECK(r.series[b].base_price > r.series[b - 1].base_price);

    const auto bad = simulate_xt8a(p, w, 2, bp0 / 1000, bp0);
    CHECK_FALSE(bad.feasible);
    CHECK_FALSE(bad.note.empty());
}

TEST_CASE("exploit JSON") {
    const auto p = policy_preset("reth-fifo-reduced(16)");
    const auto x = plan_exploit(Pattern::XT8, p);
    const auto j = exploit_to_json(x);
    CHECK(j.at("version") == 1);
    CHECK(exploit_to_json(exploit_from_json(j)) == j);
    auto wrong = j;
    wrong["version"] = 2;
    CHECK_THROWS_AS(exploit_from_json(wrong), std::invalid_argument);
    const auto r = replay(nullptr, p, {}, 3);
    CHECK(report_to_json(r).contains("success_rate"));
}
