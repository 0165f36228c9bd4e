#include <cctype>
#include <cmath>
#include <ostream>
#include <string>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "rec/milp.hpp"

namespace rec::milp {

namespace {

// LP-file names may not contain spaces or operators; anything outside the
// safe set becomes '_'. Unnamed entities get positional names.
std::string lp_name(const std::string& name, char prefix, int index) {
  if (name.empty()) return fmt::format("{}{}", prefix, index);
  std::string out;
  out.reserve(name.size());
  for (char c : name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '@' || c == '#';
    out.push_back(ok ? c : '_');
  }
  if (std::isdigit(static_cast<unsigned char>(out.front())) || out.front() == '.') out.insert(out.begin(), prefix);
  return out;
}

void write_terms(std::ostream& out, const Problem& p, const std::vector<Term>& terms) {
  bool first = true;
  int on_line = 0;
  for (const Term& t : terms) {
    if (t.coef == 0.0) continue;
    const char* sign = t.coef < 0 ? "-" : (first ? "" : "+");
    fmt::print(out, "{}{} {:.17g} {}", first ? "" : " ", sign, std::abs(t.coef),
               lp_name(p.variables()[static_cast<std::size_t>(t.var)].name, 'x', t.var));
    first = false;
    if (++on_line == 6) {
      out << "\n   ";
      on_line = 0;
    }
  }
  if (first) out << "0 " << lp_name(p.variables().empty() ? "" : p.variables()[0].name, 'x', 0);
}

}  // namespace

void write_lp(const Problem& problem, std::ostream& out) {
  out << "Minimize\n obj: ";
  std::vector<Term> obj;
  for (int j = 0; j < problem.num_variables(); ++j)
    if (problem.objective()[static_cast<std::size_t>(j)] != 0.0) obj.push_back({j, problem.objective()[static_cast<std::size_t>(j)]});
  write_terms(out, problem, obj);
  if (problem.objective_constant() != 0.0)
    fmt::print(out, " {} {:.17g}", problem.objective_constant() < 0 ? "-" : "+", std::abs(problem.objective_constant()));
  out << "\nSubject To\n";
  int idx = 0;
  for (const ConstraintRow& r : problem.rows()) {
    if (r.terms.empty()) {
      ++idx;
      continue;
    }
    fmt::print(out, " {}: ", lp_name(r.name, 'c', idx));
    write_terms(out, problem, r.terms);
    const char* op = r.sense == Sense::le ? "<=" : (r.sense == Sense::ge ? ">=" : "=");
    fmt::print(out, " {} {:.17g}\n", op, r.rhs);
    ++idx;
  }
  out << "Bounds\n";
  for (int j = 0; j < problem.num_variables(); ++j) {
    const Variable& v = problem.variables()[static_cast<std::size_t>(j)];
    if (v.kind == VarKind::binary && v.lb == 0.0 && v.ub == 1.0) continue;
    const std::string n = lp_name(v.name, 'x', j);
    if (v.lb == v.ub)
      fmt::print(out, " {} = {:.17g}\n", n, v.lb);
    else
      fmt::print(out, " {:.17g} <= {} <= {:.17g}\n", v.lb, n, v.ub);
  }
  bool any_binary = false;
  for (int j = 0; j < problem.num_variables(); ++j) {
    const Variable& v = problem.variables()[static_cast<std::size_t>(j)];
    if (v.kind != VarKind::binary) continue;
    if (!any_binary) out << "Binaries\n";
    any_binary = true;
    out << ' ' << lp_name(v.name, 'x', j) << '\n';
  }
  out << "End\n";
}

}  // namespace rec::milp
