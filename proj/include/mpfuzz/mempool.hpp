#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpfuzz/txmodel.hpp"

namespace mpfuzz {

enum class EvictionRule { PriceAny, PriceChildlessOnly, AccountMinPrice, None };
enum class TurningRule { DemoteToFuture, DropDescendants };

struct MempoolPolicy {
    std::string name;
    uint32_t m = 1;
    uint32_t py1 = 0;  // future quota
    uint32_t py2 = 1;  // per-sender limit
    uint32_t py3 = 0;  // pool executable count above which py2 applies
    EvictionRule eviction_rule = EvictionRule::PriceAny;
    TurningRule turning_rule = TurningRule::DemoteToFuture;
    bool replacement_allowed = true;
    bool replacement_overdraft_guard = false;
    bool reversal_guard = false;
    bool future_evict_guard = false;  // future arrivals may not evict valid txs
    bool latent_evict_guard = false;  // latent-overdraft arrivals may not evict valid txs

    void validate() const;  // throws std::invalid_argument
    bool operator==(const MempoolPolicy&) const = default;
};

enum class DeclineReason {
    FullNoVictim,
    QuotaFuture,
    SenderLimit,
    PriceTooLow,
    OverdraftGuard,
    ReversalGuard,
    Overdraft,
    NonceTooLow,
};

struct AdmissionOutcome {
    enum class Kind { AdmittedNoEvict, AdmittedEvicting, Declined };
    Kind kind = Kind::AdmittedNoEvict;
    std::vector<Transaction> evicted;
    DeclineReason reason = DeclineReason::FullNoVictim;

    bool admitted() const { return kind != Kind::Declined; }
};

struct Slot {
    Transaction tx;
    uint64_t seq = 0;  // admission order, used for tie-breaking
    int64_t displaced = 0;  // price of the tx this one evicted on arrival, 0 if none
    bool operator==(const Slot&) const = default;
};

struct Declined {
    Transaction tx;
    DeclineReason reason;
    bool operator==(const Declined&) const = default;
};

struct MempoolState {
    MempoolPolicy policy;
    WorldState world;
    std::vector<Slot> slots;
    std::vector<Declined> declined;
    uint64_t next_seq = 0;
    uint32_t next_benign = 1;

    // the sender's resident txs, nonce ascending
    std::vector<Transaction> resident_of(const Address& a) const;
    // class of a resident tx relative to the other residents of its sender
    ValidityClass slot_class(size_t i) const;
    std::vector<ValidityClass> slot_classes() const;
    bool operator==(const MempoolState&) const = default;
};

MempoolState new_pool(const MempoolPolicy& policy, const WorldState& world);

// pure transition
std::pair<MempoolState, AdmissionOutcome> admit(const MempoolState& state, const Transaction& tx);
// same transition, mutating in place
AdmissionOutcome admit_in_place(MempoolState& state, const Transaction& tx);

// next benign sender index not yet used by fill_normal / probes
Transaction normal_tx(MempoolState& state, int64_t price = 3);
MempoolState fill_normal(const MempoolState& state, uint32_t k);

std::pair<std::vector<Transaction>, MempoolState> build_block(const MempoolState& state,
                                                              int64_t block_gas_limit);

MempoolPolicy policy_preset(const std::string& name);
std::vector<std::string> preset_names();

std::string to_string(EvictionRule r);
std::string to_string(TurningRule r);
std::string to_string(DeclineReason r);
std::string to_string(AdmissionOutcome::Kind k);
EvictionRule eviction_rule_from(const std::string& s);
TurningRule turning_rule_from(const std::string& s);

nlohmann::ordered_json policy_to_json(const MempoolPolicy& p);
MempoolPolicy policy_from_json(const nlohmann::ordered_json& j, MempoolPolicy base);
// slots sorted by sender then nonce, declined log in arrival order
nlohmann::ordered_json state_to_json(const MempoolState& s);

}  // namespace mpfuzz
