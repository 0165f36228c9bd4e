#include "rec/settlement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace rec {

double shared_power(double pv, std::span<const double> member_powers) {
  return std::min(pv, std::accumulate(member_powers.begin(), member_powers.end(), 0.0));
}

double step_receipt(double p_sh, double p_pv, double incentive_rate, double market_price, double dt) {
  return incentive_rate * dt * p_sh + market_price * dt * p_pv;
}

void SettlementLedger::append(std::span<const double> member_powers, double pv_kw) {
  p_member.emplace_back(member_powers.begin(), member_powers.end());
  pv.push_back(pv_kw);
  p_sh.push_back(shared_power(pv_kw, member_powers));
}

double SettlementLedger::member_cost(const TariffSet& tariffs, int k, int member) const {
  return tariffs.member_tariff[static_cast<std::size_t>(member)][static_cast<std::size_t>(k)] * dt_hours *
         p_member[static_cast<std::size_t>(k - k_begin)][static_cast<std::size_t>(member)];
}

double SettlementLedger::receipt(const TariffSet& tariffs, int k) const {
  const auto t = static_cast<std::size_t>(k - k_begin);
  return step_receipt(p_sh[t], pv[t], tariffs.incentive_rate, tariffs.market_price[static_cast<std::size_t>(k)],
                      dt_hours);
}

std::vector<double> accumulate_bills(const SettlementLedger& ledger, const TariffSet& tariffs, int k_begin,
                                     int k_end) {
  const std::size_t n = ledger.p_member.empty() ? tariffs.member_tariff.size() : ledger.p_member.front().size();
  std::vector<double> bills(n, 0.0);
  for (int k = k_begin; k < k_end; ++k)
    for (std::size_t i = 0; i < n; ++i) bills[i] += ledger.member_cost(tariffs, k, static_cast<int>(i));
  return bills;
}

const char* to_string(AllocationPolicy p) {
  return p == AllocationPolicy::loss_compensating ? "loss_compensating" : "equal_split";
}

const char* to_string(Aggregation a) { return a == Aggregation::step ? "step" : "hourly"; }

std::vector<double> allocate_discount(double total, std::span<const double> losses, AllocationPolicy policy) {
  const auto n = static_cast<double>(losses.size());
  std::vector<double> out(losses.size(), total / n);
  if (policy == AllocationPolicy::equal_split) return out;
  const double remainder = (total - std::accumulate(losses.begin(), losses.end(), 0.0)) / n;
  for (std::size_t i = 0; i < losses.size(); ++i) out[i] = losses[i] + remainder;
  return out;
}

double shared_energy_kwh(const SettlementLedger& ledger, int k_begin, int k_end, Aggregation aggregation) {
  const double dt = ledger.dt_hours;
  double se = 0.0;
  if (aggregation == Aggregation::step) {
    for (int k = k_begin; k < k_end; ++k) se += dt * ledger.p_sh[static_cast<std::size_t>(k - ledger.k_begin)];
    return se;
  }
  // Hours are aligned on step 0; a trailing partial hour is averaged over
  // the steps it has.
  const int per_hour = std::max(1, static_cast<int>(std::lround(1.0 / dt)));
  for (int h0 = k_begin - (k_begin % per_hour); h0 < k_end; h0 += per_hour) {
    const int a = std::max(h0, k_begin);
    const int b = std::min(h0 + per_hour, k_end);
    double pv = 0.0, load = 0.0;
    for (int k = a; k < b; ++k) {
      const auto t = static_cast<std::size_t>(k - ledger.k_begin);
      pv += ledger.pv[t];
      for (double p : ledger.p_member[t]) load += p;
    }
    se += dt * std::min(pv, load);
  }
  return se;
}

CommunityTotals community_totals(const SettlementLedger& ledger, const TariffSet& tariffs, int k_begin, int k_end,
                                 Aggregation aggregation) {
  CommunityTotals c;
  c.se_kwh = shared_energy_kwh(ledger, k_begin, k_end, aggregation);
  c.discount_se = tariffs.incentive_rate * c.se_kwh;
  for (int k = k_begin; k < k_end; ++k) {
    const double pv = ledger.pv[static_cast<std::size_t>(k - ledger.k_begin)];
    c.pv_kwh += ledger.dt_hours * pv;
    c.discount_sale += tariffs.market_price[static_cast<std::size_t>(k)] * ledger.dt_hours * pv;
  }
  const auto bills = accumulate_bills(ledger, tariffs, k_begin, k_end);
  c.cost = std::accumulate(bills.begin(), bills.end(), 0.0) - c.discount_se;
  return c;
}

BillSummary settle(const SettlementLedger& coa, const SettlementLedger& moa, const TariffSet& tariffs, int k_begin,
                   int k_end, Aggregation aggregation, AllocationPolicy policy) {
  for (const SettlementLedger* l : {&coa, &moa})
    if (k_begin < l->k_begin || k_end > l->k_end() || k_begin > k_end)
      throw SettlementError(fmt::format("interval [{}, {}) not covered by ledger [{}, {})", k_begin, k_end,
                                        l->k_begin, l->k_end()));
  if (!coa.p_member.empty() && !moa.p_member.empty() && coa.p_member.front().size() != moa.p_member.front().size())
    throw SettlementError("ledgers have different member counts");
  for (int k = k_begin; k < k_end; ++k)
    if (coa.pv[static_cast<std::size_t>(k - coa.k_begin)] != moa.pv[static_cast<std::size_t>(k - moa.k_begin)])
      throw SettlementError(fmt::format("ledgers disagree on PV at step {}", k));

  BillSummary s;
  s.aggregation = aggregation;
  s.policy = policy;
  s.k_begin = k_begin;
  s.k_end = k_end;
  s.coa_bill = accumulate_bills(coa, tariffs, k_begin, k_end);
  s.moa_bill = accumulate_bills(moa, tariffs, k_begin, k_end);
  s.coa = community_totals(coa, tariffs, k_begin, k_end, aggregation);
  s.moa = community_totals(moa, tariffs, k_begin, k_end, aggregation);
  const std::size_t n = s.coa_bill.size();
  s.loss.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.loss[i] = s.coa_bill[i] - s.moa_bill[i];
  const double total = s.coa.discount();
  s.discount = allocate_discount(total, s.loss, policy);
  s.equal_split = allocate_discount(total, s.loss, AllocationPolicy::equal_split);
  s.discounted_bill.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.discounted_bill[i] = s.coa_bill[i] - s.discount[i];
  s.negative_remainder = total < std::accumulate(s.loss.begin(), s.loss.end(), 0.0);
  return s;
}

void write_settlement_csv(std::ostream& out, const SettlementLedger& ledger, const TariffSet& tariffs,
                          const TimeGrid& grid) {
  const std::size_t n = ledger.p_member.empty() ? 0 : ledger.p_member.front().size();
  out << "step,time_iso,pv_kw,shared_kw,receipt";
  for (std::size_t i = 0; i < n; ++i) fmt::print(out, ",p_{0},cost_{0}", i);
  out << '\n';
  for (int k = ledger.k_begin; k < ledger.k_end(); ++k) {
    const auto t = static_cast<std::size_t>(k - ledger.k_begin);
    fmt::print(out, "{},{},{:.9f},{:.9f},{:.9f}", k, step_clock(grid, k).iso, ledger.pv[t], ledger.p_sh[t],
               ledger.receipt(tariffs, k));
    for (std::size_t i = 0; i < n; ++i)
      fmt::print(out, ",{:.9f},{:.9f}", ledger.p_member[t][i], ledger.member_cost(tariffs, k, static_cast<int>(i)));
    out << '\n';
  }
}

void write_summary_csv(std::ostream& out, const BillSummary& s, const std::vector<HouseModel>& houses) {
  out << "row,house,coa_bill,moa_bill,loss,discount,discounted_bill,equal_split\n";
  for (std::size_t i = 0; i < s.coa_bill.size(); ++i)
    fmt::print(out, "member,{},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f}\n", houses[i].id, s.coa_bill[i], s.moa_bill[i],
               s.loss[i], s.discount[i], s.discounted_bill[i], s.equal_split[i]);
  out << "\nrow,controller,aggregation,se_kwh,pv_kwh,discount_se,discount_sale,discount_total,community_cost\n";
  for (const auto& [name, c] : {std::pair{"coa", s.coa}, std::pair{"moa", s.moa}})
    fmt::print(out, "community,{},{},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f}\n", name, to_string(s.aggregation),
               c.se_kwh, c.pv_kwh, c.discount_se, c.discount_sale, c.discount(), c.cost);
}

void write_summary_text(std::ostream& out, const BillSummary& s, const std::vector<HouseModel>& houses) {
  fmt::print(out, "Settlement over steps [{}, {}), shared energy per {}, allocation {}\n\n", s.k_begin, s.k_end,
             to_string(s.aggregation), to_string(s.policy));
  fmt::print(out, "{:<10} {:>12} {:>12} {:>10} {:>12} {:>14} {:>12}\n", "member", "coa bill", "moa bill", "loss",
             "discount", "net bill", "equal split");
  for (std::size_t i = 0; i < s.coa_bill.size(); ++i)
    fmt::print(out, "{:<10} {:>12.2f} {:>12.2f} {:>10.2f} {:>12.2f} {:>14.2f} {:>12.2f}\n", houses[i].id, s.coa_bill[i],
               s.moa_bill[i], s.loss[i], s.discount[i], s.discounted_bill[i], s.equal_split[i]);
  fmt::print(out, "\n{:<10} {:>12} {:>12} {:>14} {:>14} {:>14}\n", "controller", "SE kWh", "PV kWh", "SE discount",
             "sale discount", "total discount");
  for (const auto& [name, c] : {std::pair{"coa", s.coa}, std::pair{"moa", s.moa}})
    fmt::print(out, "{:<10} {:>12.2f} {:>12.2f} {:>14.2f} {:>14.2f} {:>14.2f}\n", name, c.se_kwh, c.pv_kwh,
               c.discount_se, c.discount_sale, c.discount());
  if (s.moa.se_kwh > 0.0) fmt::print(out, "\nSE ratio coa/moa: {:.3f}\n", s.coa.se_kwh / s.moa.se_kwh);
  if (s.negative_remainder) out << "warning: total discount is smaller than the sum of losses\n";
}

}  // namespace rec
