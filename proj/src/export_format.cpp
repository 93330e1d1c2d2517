#include "coadapt/export_format.hpp"

#include "coadapt/csv.hpp"
#include "coadapt/numfmt.hpp"

#include <ostream>

namespace coadapt {

namespace {

void put_opt(std::ostream& out, const Vector& v, Eigen::Index i) {
  out << ',';
  if (i < v.size()) out << format_double17(v[i]);
}

}  // namespace

std::size_t write_export_rows(std::ostream& out, const TrialRecord& r) {
  const std::string key = csv_field(r.participant_key);
  const std::string alpha = format_double17(r.alpha);
  std::string signs;
  for (std::size_t i = 0; i < 2; ++i) {
    signs += ',';
    if (i < r.symmetry.size()) signs += std::to_string(r.symmetry[i]);
  }
  for (const auto& s : r.samples) {
    out << key << ',' << format_double17(s.t);
    put_opt(out, s.h, 0);
    put_opt(out, s.h, 1);
    put_opt(out, s.m, 0);
    put_opt(out, s.m, 1);
    out << ',' << format_double17(s.cost_H) << ',' << format_double17(s.cost_M) << ','
        << alpha << ',' << r.trial_index << signs << '\n';
  }
  return r.samples.size();
}

}  // namespace coadapt
