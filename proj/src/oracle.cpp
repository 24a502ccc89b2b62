#include "mpfuzz/oracle.hpp"

#include <cfloat>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace mpfuzz {

void OracleConfig::validate() const {
    if (!(epsilon > 0 && epsilon <= 1) || !(lambda > 0 && lambda <= 1))
        throw std::invalid_argument("epsilon and lambda must lie in (0, 1]");
}

namespace {

int64_t price_sum(std::span<const Transaction> txs) {
    int64_t s = 0;
    for (const auto& t : txs) s += t.gas_price;
    return s;
}

}  // namespace

std::vector<Transaction> chargeable(const MempoolState& end) {
    std::vector<Transaction> out;
    const auto cls = end.slot_classes();
    for (size_t i = 0; i < end.slots.size(); ++i)
        if (cls[i] == ValidityClass::Pending && end.slots[i].tx.sender.role == Role::Adversarial)
            out.push_back(end.slots[i].tx);
    return out;
}

long double asym_E(std::span<const Transaction> st0, std::span<const Transaction> stn_chargeable) {
    const int64_t den = price_sum(st0);
    if (den <= 0) throw std::invalid_argument("asym_E: initial state has no fees");
    return static_cast<long double>(price_sum(stn_chargeable)) / den;
}

long double asym_D(std::span<const Transaction> stn, std::span<const Transaction> stn_chargeable,
                   std::span<const Transaction> dcn) {
    const int64_t dsum = price_sum(dcn);
    if (stn.empty() || dcn.empty() || dsum <= 0)
        throw std::invalid_argument("asym_D: empty state or declined set");
    return (static_cast<long double>(price_sum(stn_chargeable)) * dcn.size()) /
           (static_cast<long double>(dsum) * stn.size());
}

OracleVerdict check_eviction(std::span<const Transaction> st0, std::span<const Transaction> stn,
                             std::span<const Transaction> stn_chargeable, const OracleConfig& cfg) {
    OracleVerdict v;
    v.kind = OracleKind::Eviction;
    v.damage_ok = true;
    for (const auto& a : st0)
        for (const auto& b : stn)
            if (a == b) v.damage_ok = false;
    v.asym_num = price_sum(stn_chargeable);
    v.asym_den = price_sum(st0);
    v.asym = asym_E(st0, stn_chargeable);
    v.cost_ok = v.asym < cfg.epsilon;
    v.triggered = v.damage_ok && v.cost_ok;
    return v;
}

OracleVerdict check_eviction(std::span<const Transaction> st0, const MempoolState& end,
                             const OracleConfig& cfg) {
    std::vector<Transaction> stn;
    for (const auto& s : end.slots) stn.push_back(s.tx);
    const auto ch = chargeable(end);
    return check_eviction(st0, stn, ch, cfg);
}

OracleVerdict check_locking(std::span<const Transaction> stn, std::span<const Transaction> stn_chargeable,
                            std::span<const Transaction> dcn, const OracleConfig& cfg) {
    OracleVerdict v;
    v.kind = OracleKind::Locking;
    if (stn.empty() || dcn.empty()) return v;
    std::set<Address> resident, declined;
    bool ok = true;
    for (const auto& t : stn) {
        ok = ok && t.sender.role == Role::Adversarial;
        resident.insert(t.sender);
    }
    for (const auto& t : dcn) {
        ok = ok && t.sender.role == Role::Benign;
        declined.insert(t.sender);
    }
    for (const auto& a : declined) ok = ok && !resident.count(a);
    v.damage_ok = ok;
    v.asym_num = price_sum(stn_chargeable) * static_cast<int64_t>(dcn.size());
    v.asym_den = price_sum(dcn) * static_cast<int64_t>(stn.size());
    v.asym = asym_D(stn, stn_chargeable, dcn);
    v.cost_ok = v.asym < cfg.lambda;
    v.triggered = v.damage_ok && v.cost_ok;
    return v;
}

TpFp classify_tp_fp(const OracleVerdict& short_verdict, const OracleVerdict& extended,
                    const OracleConfig& cfg) {
    const long double bound = extended.kind == OracleKind::Eviction ? cfg.epsilon : cfg.lambda;
    if (short_verdict.triggered && extended.damage_ok && extended.asym < bound)
        return TpFp::TruePositive;
    return TpFp::FalsePositive;
}

std::string to_string(OracleKind k) { return k == OracleKind::Eviction ? "Eviction" : "Locking"; }
std::string to_string(TpFp t) { return t == TpFp::TruePositive ? "TruePositive" : "FalsePositive"; }

std::string decimal_string(long double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*Lg", LDBL_DIG + 3, x);
    return buf;
}

nlohmann::ordered_json verdict_to_json(const OracleVerdict& v) {
    return nlohmann::ordered_json{{"kind", to_string(v.kind)},
                                  {"triggered", v.triggered},
                                  {"asym", decimal_string(v.asym)},
                                  {"asym_num", v.asym_num},
                                  {"asym_den", v.asym_den},
                                  {"damage_ok", v.damage_ok},
                                  {"cost_ok", v.cost_ok}};
}

OracleVerdict verdict_from_json(const nlohmann::ordered_json& j) {
    OracleVerdict v;
    v.kind = j.at("kind").get<std::string>() == "Locking" ? OracleKind::Locking : OracleKind::Eviction;
    v.triggered = j.at("triggered").get<bool>();
    v.asym = std::stold(j.at("asym").get<std::string>());
    v.asym_num = j.value("asym_num", int64_t{0});
    v.asym_den = j.value("asym_den", int64_t{1});
    v.damage_ok = j.at("damage_ok").get<bool>();
    v.cost_ok = j.at("cost_ok").get<bool>();
    return v;
}

}  // namespace mpfuzz
