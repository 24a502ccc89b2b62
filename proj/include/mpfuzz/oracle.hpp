#pragma once

#include <span>
#include <string>
#include <vector>

#include "mpfuzz/mempool.hpp"

namespace mpfuzz {

struct OracleConfig {
    long double epsilon = 0.36L;
    long double lambda = 0.46L;
    void validate() const;
};

enum class OracleKind { Eviction, Locking };

struct OracleVerdict {
    bool triggered = false;
    OracleKind kind = OracleKind::Eviction;
    long double asym = 0;
    // asym as an exact ratio of integer price sums
    int64_t asym_num = 0;
    int64_t asym_den = 1;
    bool damage_ok = false;
    bool cost_ok = false;
};

// adversarial end-state txs whose fee would actually be charged (Pending class)
std::vector<Transaction> chargeable(const MempoolState& end);

long double asym_E(std::span<const Transaction> st0, std::span<const Transaction> stn_chargeable);
long double asym_D(std::span<const Transaction> stn, std::span<const Transaction> stn_chargeable,
                   std::span<const Transaction> dcn);

OracleVerdict check_eviction(std::span<const Transaction> st0, std::span<const Transaction> stn,
                             std::span<const Transaction> stn_chargeable, const OracleConfig& cfg);
OracleVerdict check_eviction(std::span<const Transaction> st0, const MempoolState& end,
                             const OracleConfig& cfg);

OracleVerdict check_locking(std::span<const Transaction> stn, std::span<const Transaction> stn_chargeable,
                            std::span<const Transaction> dcn, const OracleConfig& cfg);

enum class TpFp { TruePositive, FalsePositive };
TpFp classify_tp_fp(const OracleVerdict& short_verdict, const OracleVerdict& extended,
                    const OracleConfig& cfg);

std::string to_string(OracleKind k);
std::string to_string(TpFp t);
std::string decimal_string(long double x);
nlohmann::ordered_json verdict_to_json(const OracleVerdict& v);
OracleVerdict verdict_from_json(const nlohmann::ordered_json& j);

}  // namespace mpfuzz
