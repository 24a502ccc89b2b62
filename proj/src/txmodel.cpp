#include "mpfuzz/txmodel.hpp"

#include <stdexcept>

namespace mpfuzz {

int64_t fee(const Transaction& tx) { return tx.gas_price * kTxGas; }

WorldState WorldState::for_capacity(int64_t m) {
    WorldState w;
    w.adversarial_balance_default = m;
    w.benign_balance_default = m;
    return w;
}

AccountState WorldState::account(const Address& a) const {
    auto it = accounts.find(a);
    if (it != accounts.end()) return it->second;
    AccountState s;
    s.balance = a.role == Role::Adversarial ? adversarial_balance_default : benign_balance_default;
    return s;
}

ValidityClass classify(const Transaction& tx, const WorldState& world,
                       std::span<const Transaction> resident) {
    const AccountState acct = world.account(tx.sender);
    for (const auto& r : resident)
        if (r.nonce == tx.nonce) return ValidityClass::Replacement;

    // consecutive chain starting right after the confirmed nonce
    uint64_t expect = acct.confirmed_nonce + 1;
    int64_t ancestors = 0;
    for (const auto& r : resident) {
        if (r.nonce < expect) continue;
        if (r.nonce != expect || r.nonce > tx.nonce) break;
        ancestors += r.value;
        ++expect;
    }
    if (tx.nonce > expect) return ValidityClass::Future;
    if (tx.value > acct.balance) return ValidityClass::Overdraft;
    if (tx.value + ancestors > acct.balance) return ValidityClass::LatentOverdraft;
    return ValidityClass::Pending;
}

std::string to_string(Role r) { return r == Role::Benign ? "Benign" : "Adversarial"; }

std::string to_string(ValidityClass c) {
    switch (c) {
        case ValidityClass::Pending: return "Pending";
        case ValidityClass::Future: return "Future";
        case ValidityClass::Overdraft: return "Overdraft";
        case ValidityClass::LatentOverdraft: return "LatentOverdraft";
        case ValidityClass::Replacement: return "Replacement";
    }
    return "?";
}

std::string to_string(const Address& a) {
    return (a.role == Role::Benign ? "B" : "A") + std::to_string(a.index);
}

void to_json(nlohmann::ordered_json& j, const Address& a) {
    j = nlohmann::ordered_json{{"role", to_string(a.role)}, {"index", a.index}};
}

void from_json(const nlohmann::ordered_json& j, Address& a) {
    const auto role = j.at("role").get<std::string>();
    if (role == "Benign") a.role = Role::Benign;
    else if (role == "Adversarial") a.role = Role::Adversarial;
    else throw std::invalid_argument("bad role: " + role);
    a.index = j.at("index").get<uint32_t>();
}

void to_json(nlohmann::ordered_json& j, const Transaction& tx) {
    j = nlohmann::ordered_json{{"sender", tx.sender},
                               {"nonce", tx.nonce},
                               {"value", tx.value},
                               {"gas_price", tx.gas_price}};
}

void from_json(const nlohmann::ordered_json& j, Transaction& tx) {
    tx.sender = j.at("sender").get<Address>();
    tx.nonce = j.at("nonce").get<uint64_t>();
    tx.value = j.at("value").get<int64_t>();
    tx.gas_price = j.at("gas_price").get<int64_t>();
}

}  // namespace mpfuzz
