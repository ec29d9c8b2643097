#include "vulnres/cost.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "vulnres/error.hpp"

namespace vulnres {

namespace {

constexpr int kDecimals = 12;

__int128 round_div(__int128 num, __int128 den) {
  if (den < 0) {
    num = -num;
    den = -den;
  }
  __int128 q = num / den;
  __int128 r = num % den;
  if (2 * (r < 0 ? -r : r) >= den) q += num < 0 ? -1 : 1;
  return q;
}

std::int64_t narrow(__int128 v) {
  if (v > INT64_MAX || v < INT64_MIN) throw Error(ErrorCode::InvalidConfig, "money amount out of range");
  return static_cast<std::int64_t>(v);
}

}  // namespace

Money Money::parse(std::string_view decimal) {
  auto bad = [&] { return Error(ErrorCode::InvalidConfig, fmt::format("not a decimal amount: '{}'", decimal)); };
  std::string_view s = decimal;
  bool negative = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    negative = s[0] == '-';
    s.remove_prefix(1);
  }
  auto dot = s.find('.');
  std::string_view whole = s.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (whole.empty() && frac.empty()) throw bad();
  if (frac.size() > kDecimals) throw bad();
  __int128 units = 0;
  for (char c : whole) {
    if (c < '0' || c > '9') throw bad();
    units = units * 10 + (c - '0');
    if (units > INT64_MAX) throw bad();
  }
  for (size_t i = 0; i < kDecimals; ++i) {
    int digit = 0;
    if (i < frac.size()) {
      if (frac[i] < '0' || frac[i] > '9') throw bad();
      digit = frac[i] - '0';
    }
    units = units * 10 + digit;
  }
  return Money(narrow(negative ? -units : units));
}

std::string Money::str(int min_decimals) const {
  __int128 v = units_;
  bool negative = v < 0;
  if (negative) v = -v;
  auto whole = static_cast<std::int64_t>(v / kUnitsPerDollar);
  auto frac = static_cast<std::int64_t>(v % kUnitsPerDollar);
  std::string digits = fmt::format("{:012d}", frac);
  size_t keep = digits.size();
  while (keep > static_cast<size_t>(min_decimals) && digits[keep - 1] == '0') --keep;
  std::string out = fmt::format("{}{}", negative ? "-" : "", whole);
  if (keep > 0) out += "." + digits.substr(0, keep);
  return out;
}

std::string Money::rounded(int decimals) const {
  decimals = std::clamp(decimals, 0, kDecimals);
  __int128 scale = 1;
  for (int i = decimals; i < kDecimals; ++i) scale *= 10;
  __int128 v = round_div(units_, scale) * scale;
  bool negative = v < 0;
  if (negative) v = -v;
  auto whole = static_cast<std::int64_t>(v / kUnitsPerDollar);
  std::string digits = fmt::format("{:012d}", static_cast<std::int64_t>(v % kUnitsPerDollar));
  std::string out = fmt::format("{}{}", negative ? "-" : "", whole);
  if (decimals > 0) out += "." + digits.substr(0, decimals);
  return out;
}

Money Money::divided_by(std::int64_t n) const {
  if (n == 0) throw Error(ErrorCode::InvalidConfig, "division of money by zero");
  return Money(narrow(round_div(units_, n)));
}

Money Money::scaled(Money amount, std::int64_t count, std::int64_t per) {
  return Money(narrow(round_div(static_cast<__int128>(amount.units_) * count, per)));
}

Money PriceTable::cost(const std::string& model, std::int64_t input_tokens, std::int64_t output_tokens) const {
  auto it = prices_.find(model);
  if (it == prices_.end()) return Money();
  return Money::scaled(it->second.input_per_million, input_tokens, 1'000'000) +
         Money::scaled(it->second.output_per_million, output_tokens, 1'000'000);
}

namespace {
Money money_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::InvalidConfig, fmt::format("price entry lacks '{}'", key));
  if (it->is_string()) return Money::parse(it->get<std::string>());
  if (it->is_number()) return Money::parse(it->dump());
  throw Error(ErrorCode::InvalidConfig, fmt::format("price '{}' must be a decimal string", key));
}
}  // namespace

PriceTable PriceTable::from_json(const nlohmann::json& j) {
  PriceTable t;
  if (j.is_null()) return t;
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "price table must be an object");
  for (const auto& [model, entry] : j.items())
    t.set(model, {money_field(entry, "input_per_million"), money_field(entry, "output_per_million")});
  return t;
}

nlohmann::json PriceTable::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [model, p] : prices_)
    j[model] = {{"input_per_million", p.input_per_million.str()}, {"output_per_million", p.output_per_million.str()}};
  return j;
}

CostRecord::CostRecord(const CostRecord& other) : entries_(other.entries()) {}

CostRecord& CostRecord::operator=(const CostRecord& other) {
  if (this != &other) {
    auto copy = other.entries();
    std::lock_guard lock(mutex_);
    entries_ = std::move(copy);
  }
  return *this;
}

void CostRecord::add(CostEntry entry) {
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(entry));
}

std::vector<CostEntry> CostRecord::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

Money CostRecord::total() const {
  Money sum;
  for (const auto& e : entries()) sum += e.dollars;
  return sum;
}

Money CostRecord::total(CallKind kind) const {
  Money sum;
  for (const auto& e : entries())
    if (e.kind == kind) sum += e.dollars;
  return sum;
}

nlohmann::json CostRecord::to_json() const {
  nlohmann::json calls = nlohmann::json::array();
  for (const auto& e : entries())
    calls.push_back({{"caller", e.caller},
                     {"model", e.model},
                     {"kind", e.kind == CallKind::Chat ? "chat" : "embedding"},
                     {"input_tokens", e.input_tokens},
                     {"output_tokens", e.output_tokens},
                     {"dollars", e.dollars.str()}});
  return {{"calls", calls},
          {"chat_dollars", total(CallKind::Chat).str()},
          {"embedding_dollars", total(CallKind::Embedding).str()},
          {"total_dollars", total().str()}};
}

CostRecord CostRecord::from_json(const nlohmann::json& j) {
  CostRecord r;
  for (const auto& c : j.at("calls")) {
    CostEntry e;
    e.caller = c.at("caller").get<std::string>();
    e.model = c.at("model").get<std::string>();
    e.kind = c.at("kind").get<std::string>() == "embedding" ? CallKind::Embedding : CallKind::Chat;
    e.input_tokens = c.at("input_tokens").get<std::int64_t>();
    e.output_tokens = c.at("output_tokens").get<std::int64_t>();
    e.dollars = Money::parse(c.at("dollars").get<std::string>());
    r.add(std::move(e));
  }
  return r;
}

}  // namespace vulnres
