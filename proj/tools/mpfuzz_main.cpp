#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "mpfuzz/baselines.hpp"
#include "mpfuzz/exploitkit.hpp"

namespace fs = std::filesystem;
using namespace mpfuzz;
using json = nlohmann::ordered_json;

namespace {

struct Common {
    std::string config, preset, epsilon, lambda, out = "out";
    uint64_t seed = 0, budget_mutations = 100000, workers = 1;
    double budget_seconds = 60;
    bool no_cache = false;
    std::vector<CLI::Option*> opts;
};

// flags (or their MPFUZZ_ env vars) > config file > preset defaults
struct RunConfig {
    MempoolPolicy policy;
    std::string preset;
    FuzzConfig fuzz;
    fs::path out;
    uint64_t workers = 1;

    json to_json() const {
        return {{"preset", preset},
                {"policy", policy_to_json(policy)},
                {"epsilon", decimal_string(fuzz.oracle.epsilon)},
                {"lambda", decimal_string(fuzz.oracle.lambda)},
                {"seed", fuzz.rng_seed},
                {"budget_mutations", fuzz.max_mutations},
                {"budget_seconds", fuzz.max_seconds},
                {"no_cache", !fuzz.use_cache},
                {"eviction", fuzz.eviction},
                {"locking", fuzz.locking},
                {"mode", fuzz.mode == OracleMode::Standard ? "standard" : "deter-invalid"},
                {"stop_at_first", fuzz.stop_at_first},
                {"workers", workers},
                {"out", out.string()}};
    }
};

void add_common(CLI::App* app, Common& c) {
    auto add = [&](CLI::Option* o) { c.opts.push_back(o); };
    add(app->add_option("--config", c.config, "JSON run config")->envname("MPFUZZ_CONFIG"));
    add(app->add_option("--preset", c.preset, "policy preset, e.g. geth-1.11-reduced(3,1,2,2)")
            ->envname("MPFUZZ_PRESET"));
    add(app->add_option("--epsilon", c.epsilon, "eviction oracle bound")->envname("MPFUZZ_EPSILON"));
    add(app->add_option("--lambda", c.lambda, "locking oracle bound")->envname("MPFUZZ_LAMBDA"));
    add(app->add_option("--seed", c.seed)->envname("MPFUZZ_SEED"));
    add(app->add_option("--budget-mutations", c.budget_mutations)->envname("MPFUZZ_BUDGET_MUTATIONS"));
    add(app->add_option("--budget-seconds", c.budget_seconds)->envname("MPFUZZ_BUDGET_SECONDS"));
    add(app->add_option("--out", c.out, "output directory")->envname("MPFUZZ_OUT"));
    add(app->add_option("--workers", c.workers)->envname("MPFUZZ_WORKERS")->check(CLI::PositiveNumber));
    add(app->add_flag("--no-cache", c.no_cache)->envname("MPFUZZ_NO_CACHE"));
}

bool given(const Common& c, const std::string& name) {
    for (auto* o : c.opts)
        if (o->get_name() == name) return o->count() > 0;
    return false;
}

long double parse_ld(const std::string& s, const char* what) {
    try {
        size_t used = 0;
        long double v = std::stold(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument(std::string("bad ") + what + ": " + s);
    }
}

long double json_ld(const json& j) {
    return j.is_string() ? parse_ld(j.get<std::string>(), "number") : j.get<long double>();
}

RunConfig resolve(const Common& c, const std::string& default_preset = "geth-legacy-reduced(6)") {
    json file = json::object();
    if (!c.config.empty()) {
        std::ifstream in(c.config);
        if (!in) throw std::invalid_argument("cannot read config " + c.config);
        file = json::parse(in);
        if (!file.is_object()) throw std::invalid_argument("config must be a JSON object");
    }
    RunConfig r;
    r.preset = given(c, "--preset") ? c.preset : file.value("preset", default_preset);
    r.policy = policy_preset(r.preset);
    if (file.contains("policy")) r.policy = policy_from_json(file["policy"], r.policy);

    auto& f = r.fuzz;
    if (file.contains("epsilon")) f.oracle.epsilon = json_ld(file["epsilon"]);
    if (file.contains("lambda")) f.oracle.lambda = json_ld(file["lambda"]);
    f.rng_seed = file.value("seed", f.rng_seed);
    f.max_mutations = file.value("budget_mutations", f.max_mutations);
    f.max_seconds = file.value("budget_seconds", f.max_seconds);
    f.use_cache = !file.value("no_cache", false);
    f.eviction = file.value("eviction", f.eviction);
    f.locking = file.value("locking", f.locking);
    f.stop_at_first = file.value("stop_at_first", f.stop_at_first);
    const std::string mode = file.value("mode", std::string("standard"));
    if (mode == "deter-invalid") f.mode = OracleMode::DeterInvalid;
    else if (mode != "standard") throw std::invalid_argument("unknown mode " + mode);
    r.out = file.value("out", std::string("out"));
    r.workers = file.value("workers", uint64_t{1});

    if (given(c, "--epsilon")) f.oracle.epsilon = parse_ld(c.epsilon, "epsilon");
    if (given(c, "--lambda")) f.oracle.lambda = parse_ld(c.lambda, "lambda");
    if (given(c, "--seed")) f.rng_seed = c.seed;
    if (given(c, "--budget-mutations")) f.max_mutations = c.budget_mutations;
    if (given(c, "--budget-seconds")) f.max_seconds = c.budget_seconds;
    if (given(c, "--no-cache")) f.use_cache = !c.no_cache;
    if (given(c, "--out")) r.out = c.out;
    if (given(c, "--workers")) r.workers = c.workers;
    f.oracle.validate();
    r.policy.validate();
    return r;
}

void write_file(const fs::path& p, const std::string& body) {
    fs::create_directories(p.parent_path());
    std::ofstream o(p, std::ios::binary);
    if (!o) throw std::runtime_error("cannot write " + p.string());
    o << body;
}

Exploit read_exploit(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read exploit " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("exploit file is not JSON: ") + e.what());
    }
    return exploit_from_json(j);
}

std::string csv_ld(long double x) { return decimal_string(x); }

int cmd_fuzz(const Common& c) {
    RunConfig r = resolve(c);
    fs::create_directories(r.out / "exploits");
    write_file(r.out / "config.json", r.to_json().dump(2) + "\n");
    std::ofstream log(r.out / "progress.jsonl", std::ios::binary);
    r.fuzz.log = &log;
    const FuzzResult res = run_mpfuzz(r.policy, r.fuzz);
    const auto xs = dedup(res.exploits);
    // stale files from a longer earlier run would break byte-identical reruns
    for (const auto& e : fs::directory_iterator(r.out / "exploits"))
        if (e.path().extension() == ".json") fs::remove(e.path());
    json list = json::array();
    for (size_t i = 0; i < xs.size(); ++i) {
        std::ostringstream name;
        name << "exploit-" << std::setw(4) << std::setfill('0') << i << ".json";
        write_file(r.out / "exploits" / name.str(), exploit_to_json(xs[i]).dump(2) + "\n");
        list.push_back({{"file", name.str()},
                        {"symbol_sequence", to_string(xs[i].symbol_sequence)},
                        {"pattern", xs[i].pattern},
                        {"end_state", xs[i].end_state},
                        {"asym", decimal_string(xs[i].verdict.asym)}});
    }
    json summary = {{"preset", r.preset},
                    {"exploits", xs.size()},
                    {"mutations", res.mutations},
                    {"states_covered", res.covered},
                    {"first_exploit_at", res.first_exploit_at},
                    {"found", list}};
    write_file(r.out / "summary.json", summary.dump(2) + "\n");
    std::cout << "mutations " << res.mutations << ", states " << res.covered << ", exploits " << xs.size()
              << "\n";
    for (const auto& x : xs)
        std::cout << "  " << to_string(x.kind) << " " << (x.pattern.empty() ? "?" : x.pattern) << " ["
                  << to_string(x.symbol_sequence) << "] -> " << x.end_state
                  << " asym=" << decimal_string(x.verdict.asym) << "\n";
    return 0;
}

int cmd_extend(const Common& c, const std::string& exploit_path, const std::string& target) {
    RunConfig r = resolve(c);
    const Exploit x = read_exploit(exploit_path);
    const MempoolPolicy tgt = policy_preset(target);
    try {
        const Extension ext = extend(x, tgt, r.fuzz.oracle);
        json j = exploit_to_json(ext.exploit);
        j["extension"] = {{"method", ext.method},
                          {"trace", ext.trace},
                          {"tp_fp", to_string(classify_tp_fp(x.verdict, ext.exploit.verdict, r.fuzz.oracle))}};
        write_file(r.out / "extended.json", j.dump(2) + "\n");
        std::cout << "extended via " << ext.method << ", asym " << decimal_string(ext.exploit.verdict.asym)
                  << ", " << j["extension"]["tp_fp"].get<std::string>() << "\n";
    } catch (const ExtensionFailed& e) {
        write_file(r.out / "divergence.txt", e.trace);
        std::cout << e.what() << " (divergence at " << e.divergence << ")\n" << e.trace;
    }
    return 0;
}

struct WorkloadFlags {
    uint32_t per_block = 0, block_txs = 0, txs_per_sender = 1;
    int64_t price = 3, spread = 0;
    WorkloadSpec spec(uint64_t seed) const {
        WorkloadSpec w;
        w.per_block = per_block;
        w.block_txs = block_txs;
        w.txs_per_sender = txs_per_sender;
        w.price = price;
        w.price_spread = spread;
        w.rng_seed = seed;
        return w;
    }
};

void add_workload(CLI::App* app, WorkloadFlags& w) {
    app->add_option("--per-block", w.per_block, "benign arrivals per block (default m/2)");
    app->add_option("--block-txs", w.block_txs, "txs per block (default m/2)");
    app->add_option("--txs-per-sender", w.txs_per_sender);
    app->add_option("--price", w.price, "benign price");
    app->add_option("--price-spread", w.spread);
}

void write_report(const fs::path& out, const std::string& stem, const ReplayReport& rep) {
    write_file(out / (stem + ".json"), report_to_json(rep).dump(2) + "\n");
    write_file(out / (stem + ".csv"), report_csv(rep));
    std::cout << stem << ": success_rate " << decimal_string(rep.success_rate) << ", cost/block "
              << decimal_string(rep.cost_per_block) << ", benign fees/block "
              << decimal_string(rep.benign_fees_per_block) << (rep.feasible ? "" : ", infeasible: " + rep.note)
              << "\n";
}

int cmd_replay(const Common& c, const std::string& exploit_path, const WorkloadFlags& wf, uint64_t blocks,
               double delay) {
    RunConfig r = resolve(c);
    std::optional<Exploit> x;
    MempoolPolicy policy = r.policy;
    if (!exploit_path.empty()) {
        x = read_exploit(exploit_path);
        if (!given(c, "--preset") && !given(c, "--config")) policy = x->mut_config;
    }
    write_report(r.out, "replay", replay(x ? &*x : nullptr, policy, wf.spec(r.fuzz.rng_seed), blocks, delay));
    return 0;
}

int cmd_eval(const Common& c, const std::string& pattern, uint32_t m, bool xt8a, uint64_t eviction_blocks,
             int64_t lock_price, uint64_t lock_blocks, const WorkloadFlags& wf, uint64_t blocks) {
    RunConfig r = resolve(c, "reth-fifo-reduced(16)");
    if (xt8a) {
        write_report(r.out, "xt8a",
                     simulate_xt8a(r.policy, wf.spec(r.fuzz.rng_seed), eviction_blocks, lock_price,
                                   100'000'000'000'000LL, lock_blocks));
        return 0;
    }
    if (pattern.empty()) {
        std::ostringstream csv;
        csv << "pattern,preset,m,expected,observed,asym\n";
        size_t agree = 0;
        const auto cells = evaluate_matrix(m, r.fuzz.oracle);
        for (const auto& cell : cells) {
            csv << to_string(cell.pattern) << ',' << cell.preset << ',' << m << ',' << cell.expected << ','
                << cell.observed << ',' << decimal_string(cell.verdict.asym) << '\n';
            agree += cell.expected == cell.observed;
        }
        write_file(r.out / "matrix.csv", csv.str());
        std::cout << "matrix m=" << m << ": " << agree << "/" << cells.size() << " cells match\n";
        return 0;
    }
    const Pattern p = pattern_from(pattern);
    const XtPlan plan = generate_xt(p, r.policy);
    json rec = {{"pattern", pattern}, {"preset", r.policy.name}, {"compatible", plan.compatible}};
    if (!plan.compatible) {
        rec["expected_failure"] = plan.note;
        write_file(r.out / "eval.json", rec.dump(2) + "\n");
        std::cout << pattern << " on " << r.policy.name << ": incompatible (" << plan.note << ")\n";
        return 0;
    }
    const PlanRun run = run_plan(plan, r.policy, r.fuzz.oracle);
    const Exploit x = to_exploit(plan, run, r.policy);
    rec["steps"] = plan.steps;
    rec["success"] = run.success;
    rec["verdict"] = verdict_to_json(run.verdict);
    write_file(r.out / "eval.json", rec.dump(2) + "\n");
    write_file(r.out / "exploit.json", exploit_to_json(x).dump(2) + "\n");
    std::cout << pattern << " on " << r.policy.name << ": " << (run.success ? "succeeds" : "fails")
              << ", asym " << decimal_string(run.verdict.asym) << "\n";
    if (blocks > 0) write_report(r.out, "replay", replay(&x, r.policy, wf.spec(r.fuzz.rng_seed), blocks, 0));
    return 0;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> v;
    std::string cur;
    int depth = 0;
    for (char ch : s) {
        if (ch == '(') ++depth;
        if (ch == ')') --depth;
        if (ch == ',' && depth == 0) {
            if (!cur.empty()) v.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) v.push_back(cur);
    return v;
}

int cmd_compare(const Common& c, const std::string& presets, const std::string& baselines, uint64_t repeats,
                bool any_target) {
    RunConfig r = resolve(c);
    struct Cell {
        std::string who, preset;
        uint64_t seed;
        uint32_t m = 0;
        uint64_t first = 0, mutations = 0;
    };
    std::vector<Cell> cells;
    for (const auto& p : presets.empty() ? std::vector<std::string>{r.preset} : split(presets))
        for (const auto& b : split(baselines))
            for (uint64_t s = 0; s < repeats; ++s) cells.push_back({b, p, r.fuzz.rng_seed + s});

    std::atomic<size_t> next{0};
    std::mutex io;
    auto work = [&] {
        for (size_t i; (i = next++) < cells.size();) {
            Cell& cell = cells[i];
            const MempoolPolicy pol = policy_preset(cell.preset);
            FuzzConfig fc = r.fuzz;
            fc.rng_seed = cell.seed;
            fc.stop_at_first = true;
            fc.locking = false;
            fc.mode = any_target ? OracleMode::Standard : OracleMode::DeterInvalid;
            cell.m = pol.m;
            if (cell.who == "mpfuzz") {
                const auto res = run_mpfuzz(pol, fc);
                cell.first = res.first_exploit_at;
                cell.mutations = res.mutations;
            } else {
                const auto res = run_baseline(baseline_from(cell.who), pol, fc);
                cell.first = res.first_exploit_at;
                cell.mutations = res.mutations;
            }
            std::lock_guard lk(io);
            std::cerr << cell.who << " " << cell.preset << " seed " << cell.seed << ": "
                      << (cell.first ? std::to_string(cell.first) : "none after " + std::to_string(cell.mutations))
                      << "\n";
        }
    };
    std::vector<std::thread> pool;
    for (uint64_t w = 0; w < std::max<uint64_t>(1, r.workers); ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();

    std::ostringstream csv;
    csv << "baseline,preset,m,rng_seed,mutations_to_first,found\n";
    for (const auto& cell : cells)
        csv << cell.who << ',' << cell.preset << ',' << cell.m << ',' << cell.seed << ','
            << (cell.first ? cell.first : cell.mutations) << ',' << (cell.first ? "true" : "false") << '\n';
    write_file(r.out / "compare.csv", csv.str());
    std::cout << csv.str();
    return 0;
}

int cmd_presets(const std::string& filter) {
    std::cout << "name,m,py1,py2,py3,eviction,turning,replacement,overdraft_guard,reversal_guard,"
                 "future_guard,latent_guard,present\n";
    for (const auto& name : preset_names()) {
        if (!filter.empty() && name.find(filter) == std::string::npos) continue;
        const auto p = policy_preset(name);
        std::string present;
        for (Pattern x : all_patterns())
            if (expected_present(x, name)) present += (present.empty() ? "" : " ") + to_string(x);
        std::cout << name << ',' << p.m << ',' << p.py1 << ',' << p.py2 << ',' << p.py3 << ','
                  << to_string(p.eviction_rule) << ',' << to_string(p.turning_rule) << ','
                  << p.replacement_allowed << ',' << p.replacement_overdraft_guard << ',' << p.reversal_guard
                  << ',' << p.future_evict_guard << ',' << p.latent_evict_guard << ',' << present << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mpfuzz: symbolized stateful fuzzing of mempool admission policies"};
    app.require_subcommand(1);

    Common fuzz_c, ext_c, rep_c, eval_c, cmp_c;
    auto* fuzz = app.add_subcommand("fuzz", "search for eviction and locking exploits");
    add_common(fuzz, fuzz_c);

    auto* ext = app.add_subcommand("extend", "extend a short exploit to a full-size preset");
    add_common(ext, ext_c);
    std::string ext_file, ext_target;
    ext->add_option("--exploit", ext_file)->required();
    ext->add_option("--target", ext_target, "full-size preset")->required();

    auto* rep = app.add_subcommand("replay", "replay an exploit against a benign workload");
    add_common(rep, rep_c);
    std::string rep_file;
    uint64_t rep_blocks = 50;
    double rep_delay = 0;
    WorkloadFlags rep_w;
    rep->add_option("--exploit", rep_file, "omit for a no-attack run");
    rep->add_option("--blocks", rep_blocks);
    rep->add_option("--delay", rep_delay, "attack delay as a fraction of the block slot")->check(CLI::Range(0.0, 1.0));
    add_workload(rep, rep_w);

    auto* eval = app.add_subcommand("eval", "pattern matrix, single pattern runs, or the XT8a simulation");
    add_common(eval, eval_c);
    std::string eval_pattern;
    uint32_t eval_m = 16;
    bool eval_xt8a = false;
    uint64_t evict_blocks = 35, lock_blocks = 12, eval_blocks = 0;
    int64_t lock_price = 20'000'000'000'000LL;
    WorkloadFlags eval_w;
    eval->add_option("--pattern", eval_pattern, "XT1..XT9; omit for the full matrix");
    eval->add_option("--m", eval_m, "matrix pool size");
    eval->add_flag("--xt8a", eval_xt8a, "base-price decay then lock");
    eval->add_option("--eviction-blocks", evict_blocks);
    eval->add_option("--lock-blocks", lock_blocks);
    eval->add_option("--lock-price", lock_price);
    eval->add_option("--blocks", eval_blocks, "also replay the pattern for this many blocks");
    add_workload(eval, eval_w);

    auto* cmp = app.add_subcommand("compare", "mutations to first exploit, mpfuzz against baselines");
    add_common(cmp, cmp_c);
    std::string cmp_presets, cmp_baselines = "mpfuzz,B4,B3,B2,B1";
    uint64_t repeats = 5;
    bool any_target = false;
    cmp->add_option("--presets", cmp_presets, "comma separated, default --preset");
    cmp->add_option("--baselines", cmp_baselines);
    cmp->add_option("--repeats", repeats);
    cmp->add_flag("--any-exploit", any_target, "standard oracles instead of the XT3 target");

    auto* pre = app.add_subcommand("presets", "list presets and their expected pattern matrix row");
    std::string filter;
    pre->add_option("--filter", filter);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        if (*fuzz) return cmd_fuzz(fuzz_c);
        if (*ext) return cmd_extend(ext_c, ext_file, ext_target);
        if (*rep) return cmd_replay(rep_c, rep_file, rep_w, rep_blocks, rep_delay);
        if (*eval)
            return cmd_eval(eval_c, eval_pattern, eval_m, eval_xt8a, evict_blocks, lock_price, lock_blocks, eval_w,
                            eval_blocks);
        if (*cmp) return cmd_compare(cmp_c, cmp_presets, cmp_baselines, repeats, any_target);
        if (*pre) return cmd_presets(filter);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
