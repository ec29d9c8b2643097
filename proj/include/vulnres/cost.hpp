#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace vulnres {

// Fixed-point dollars with 12 decimal places.
class Money {
 public:
  static constexpr std::int64_t kUnitsPerDollar = 1'000'000'000'000;

  constexpr Money() = default;
  static constexpr Money from_units(std::int64_t units) { return Money(units); }
  // "2.5", "0.000125", "-1". Throws InvalidConfig on malformed text or more
  // than 12 decimals.
  static Money parse(std::string_view decimal);

  std::int64_t units() const { return units_; }
  // Exact decimal text with at least `min_decimals` places and no trailing
  // zeros beyond them.
  std::string str(int min_decimals = 2) const;
  // Rounded half away from zero to `decimals` places.
  std::string rounded(int decimals) const;

  Money& operator+=(Money other) {
    units_ += other.units_;
    return *this;
  }
  friend Money operator+(Money a, Money b) { return a += b; }
  // Rounded half away from zero.
  Money divided_by(std::int64_t n) const;
  // amount * count / per, rounded half away from zero.
  static Money scaled(Money amount, std::int64_t count, std::int64_t per);

  friend auto operator<=>(const Money&, const Money&) = default;

 private:
  constexpr explicit Money(std::int64_t units) : units_(units) {}
  std::int64_t units_ = 0;
};

struct ModelPrice {
  Money input_per_million;
  Money output_per_million;
};

// Per-model token prices; models without an entry cost nothing.
class PriceTable {
 public:
  void set(const std::string& model, ModelPrice price) { prices_[model] = price; }
  Money cost(const std::string& model, std::int64_t input_tokens, std::int64_t output_tokens) const;
  bool empty() const { return prices_.empty(); }

  static PriceTable from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

 private:
  std::map<std::string, ModelPrice> prices_;
};

enum class CallKind { Chat, Embedding };

struct CostEntry {
  std::string caller;
  std::string model;
  CallKind kind = CallKind::Chat;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  Money dollars;
};

// Per-call cost log; safe for concurrent add().
class CostRecord {
 public:
  CostRecord() = default;
  CostRecord(const CostRecord& other);
  CostRecord& operator=(const CostRecord& other);

  void add(CostEntry entry);
  std::vector<CostEntry> entries() const;
  Money total() const;
  Money total(CallKind kind) const;

  nlohmann::json to_json() const;
  static CostRecord from_json(const nlohmann::json& j);

 private:
  mutable std::mutex mutex_;
  std::vector<CostEntry> entries_;
};

}  // namespace vulnres
