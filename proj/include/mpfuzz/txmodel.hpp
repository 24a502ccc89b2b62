#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>

#include <json.hpp>

namespace mpfuzz {

enum class Role { Benign, Adversarial };

struct Address {
    Role role = Role::Benign;
    uint32_t index = 0;
    auto operator<=>(const Address&) const = default;
};

inline constexpr int64_t kTxGas = 21000;

struct Transaction {
    Address sender;
    uint64_t nonce = 1;
    int64_t value = 0;
    int64_t gas_price = 0;
    bool operator==(const Transaction&) const = default;
};

// fee in price units times gas; asym ratios never depend on the gas factor
int64_t fee(const Transaction& tx);

struct AccountState {
    int64_t balance = 0;
    uint64_t confirmed_nonce = 0;
    bool operator==(const AccountState&) const = default;
};

struct WorldState {
    std::map<Address, AccountState> accounts;
    int64_t adversarial_balance_default = 0;
    int64_t benign_balance_default = 0;

    static WorldState for_capacity(int64_t m);
    AccountState account(const Address& a) const;
    bool operator==(const WorldState&) const = default;
};

enum class ValidityClass { Pending, Future, Overdraft, LatentOverdraft, Replacement };

// resident: the sender's pool transactions, nonce ascending
ValidityClass classify(const Transaction& tx, const WorldState& world,
                       std::span<const Transaction> resident);

std::string to_string(Role r);
std::string to_string(ValidityClass c);
std::string to_string(const Address& a);

void to_json(nlohmann::ordered_json& j, const Address& a);
void from_json(const nlohmann::ordered_json& j, Address& a);
void to_json(nlohmann::ordered_json& j, const Transaction& tx);
void from_json(const nlohmann::ordered_json& j, Transaction& tx);

}  // namespace mpfuzz
