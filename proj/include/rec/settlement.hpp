#pragma once

// Community economics: shared energy, the community receipt, member bills,
// losses from ceding control and the discount allocation.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rec/core.hpp"

namespace rec {

// min(pv, sum of member powers), kW.
double shared_power(double pv, std::span<const double> member_powers);

// Community receipt for one step: incentive on shared energy plus the market
// value of the PV energy, currency.
double step_receipt(double p_sh, double p_pv, double incentive_rate, double market_price, double dt_hours);

// Realized powers of one controller run, one entry per step from k_begin.
struct SettlementLedger {
  double dt_hours = 0.25;
  int k_begin = 0;
  std::vector<std::vector<double>> p_member;  // [step][member], kW
  std::vector<double> pv;                     // kW
  std::vector<double> p_sh;                   // kW

  int steps() const { return static_cast<int>(pv.size()); }
  int k_end() const { return k_begin + steps(); }  // one past the last step
  void append(std::span<const double> member_powers, double pv_kw);
  double member_cost(const TariffSet& tariffs, int k, int member) const;
  double receipt(const TariffSet& tariffs, int k) const;
};

// B^i = sum over [k_begin, k_end) of gamma^i_k dt P^i_k.
std::vector<double> accumulate_bills(const SettlementLedger& ledger, const TariffSet& tariffs, int k_begin,
                                     int k_end);

enum class AllocationPolicy { loss_compensating, equal_split };
enum class Aggregation { step, hourly };

const char* to_string(AllocationPolicy p);
const char* to_string(Aggregation a);

// loss_compensating: D^i = L^i + (D - sum L) / N. equal_split: D / N.
std::vector<double> allocate_discount(double total, std::span<const double> losses,
                                      AllocationPolicy policy = AllocationPolicy::loss_compensating);

// Shared energy (kWh) and its incentive over [k_begin, k_end). Hourly mode
// averages powers over each whole hour before taking the minimum.
double shared_energy_kwh(const SettlementLedger& ledger, int k_begin, int k_end, Aggregation aggregation);

struct CommunityTotals {
  double se_kwh = 0.0;
  double discount_se = 0.0;    // incentive on shared energy
  double discount_sale = 0.0;  // market value of PV energy
  double pv_kwh = 0.0;
  double cost = 0.0;           // community cost: bills minus incentive

  double discount() const { return discount_se + discount_sale; }
};

CommunityTotals community_totals(const SettlementLedger& ledger, const TariffSet& tariffs, int k_begin, int k_end,
                                 Aggregation aggregation);

struct BillSummary {
  Aggregation aggregation = Aggregation::step;
  AllocationPolicy policy = AllocationPolicy::loss_compensating;
  int k_begin = 0;
  int k_end = 0;
  std::vector<double> coa_bill;   // B-hat
  std::vector<double> moa_bill;   // B-tilde
  std::vector<double> loss;       // L = B-hat - B-tilde
  std::vector<double> discount;   // allocated D-hat^i
  std::vector<double> discounted_bill;
  std::vector<double> equal_split;  // D-hat / N, for comparison
  CommunityTotals coa;
  CommunityTotals moa;
  bool negative_remainder = false;  // D-hat < sum L
};

class SettlementError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Throws SettlementError when either ledger does not cover [k_begin, k_end),
// the member counts differ or the PV series disagree.
BillSummary settle(const SettlementLedger& coa, const SettlementLedger& moa, const TariffSet& tariffs, int k_begin,
                   int k_end, Aggregation aggregation, AllocationPolicy policy = AllocationPolicy::loss_compensating);

// Per-step economics: step,time_iso,pv_kw,shared_kw,receipt,p_<i>,cost_<i>...
void write_settlement_csv(std::ostream& out, const SettlementLedger& ledger, const TariffSet& tariffs,
                          const TimeGrid& grid);

void write_summary_csv(std::ostream& out, const BillSummary& summary, const std::vector<HouseModel>& houses);
void write_summary_text(std::ostream& out, const BillSummary& summary, const std::vector<HouseModel>& houses);

}  // namespace rec
