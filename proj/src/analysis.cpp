#include "coadapt/analysis.hpp"

#include "coadapt/csv.hpp"
#include "coadapt/numfmt.hpp"
#include "coadapt/export_format.hpp"
#include "coadapt/stats.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

namespace coadapt {

namespace {

// Column positions in the export header.
enum Col { kKey, kT, kH1, kH2, kM1, kM2, kCostH, kCostM, kAlpha, kIndex, kS1, kS2, kCols };

Vector read_pair(const std::vector<std::string>& f, int a, int b, std::size_t line) {
  if (f[a].empty()) {
    throw std::invalid_argument("line " + std::to_string(line) + ": missing first component");
  }
  if (f[b].empty()) return Vector::Constant(1, parse_double(f[a]));
  Vector v(2);
  v << parse_double(f[a]), parse_double(f[b]);
  return v;
}

Vector vector_median(const std::vector<Vector>& xs) {
  const Eigen::Index d = xs.front().size();
  Vector out(d);
  std::vector<double> buf(xs.size());
  for (Eigen::Index i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < xs.size(); ++k) buf[k] = xs[k][i];
    out[i] = median(buf);
  }
  return out;
}

}  // namespace

std::vector<TrialRecord> read_export_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty CSV: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kExportHeader) throw std::invalid_argument("unexpected CSV header: " + line);

  std::vector<TrialRecord> trials;
  std::map<std::pair<std::string, int>, std::size_t> index;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != kCols) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(kCols) + " fields, got " +
                                  std::to_string(f.size()));
    }
    int trial_index = 0;
    try {
      std::size_t used = 0;
      trial_index = std::stoi(f[kIndex], &used);
      if (used != f[kIndex].size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": bad trial_index");
    }
    const auto key = std::make_pair(f[kKey], trial_index);
    auto it = index.find(key);
    if (it == index.end()) {
      TrialRecord rec;
      rec.participant_key = f[kKey];
      rec.trial_index = trial_index;
      rec.alpha = parse_double(f[kAlpha]);
      for (int c : {kS1, kS2}) {
        if (!f[c].empty()) rec.symmetry.push_back(static_cast<int>(parse_double(f[c])));
      }
      it = index.emplace(key, trials.size()).first;
      trials.push_back(std::move(rec));
    }
    auto& rec = trials[it->second];
    if (parse_double(f[kAlpha]) != rec.alpha) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": alpha changes within a trial");
    }
    TrialSample s;
    s.t = parse_double(f[kT]);
    s.h = read_pair(f, kH1, kH2, lineno);
    s.m = read_pair(f, kM1, kM2, lineno);
    s.cost_H = parse_double(f[kCostH]);
    s.cost_M = parse_double(f[kCostM]);
    rec.samples.push_back(std::move(s));
  }
  for (const auto& t : trials) validate_record(t);
  return trials;
}

std::vector<TrialRecord> read_export_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_export_csv(in);
}

TrialRecord trim_last_seconds(const TrialRecord& trial, double seconds) {
  if (!(seconds >= 0.0)) throw std::invalid_argument("seconds must be non-negative");
  TrialRecord out = trial;
  const auto& s = trial.samples;
  if (s.size() < 2) return out;
  const double dt = s[s.size() - 1].t - s[s.size() - 2].t;
  const double cutoff = s.back().t + dt - seconds - 1e-9;
  out.samples.clear();
  for (const auto& x : s) {
    if (x.t >= cutoff) out.samples.push_back(x);
  }
  return out;
}

TrialRecord unmirror(const TrialRecord& trial) {
  TrialRecord out = trial;
  for (auto& s : out.samples) s.h = apply_mirror(trial.symmetry, s.h);
  return out;
}

std::vector<double> uniform_bin_edges(int bins, double lo, double hi) {
  if (bins < 1 || !(lo < hi)) throw std::invalid_argument("need bins >= 1 and lo < hi");
  std::vector<double> e(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) e[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / bins;
  return e;
}

std::vector<std::size_t> histogram(const std::vector<double>& values,
                                   const std::vector<double>& edges) {
  if (edges.size() < 2) throw std::invalid_argument("histogram needs at least two edges");
  if (!std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw std::invalid_argument("histogram edges must be strictly increasing");
  }
  std::vector<std::size_t> counts(edges.size() - 1, 0);
  for (double v : values) {
    if (!(v >= edges.front() && v <= edges.back())) continue;
    auto bin = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) -
                                        edges.begin()) - 1;
    if (bin == counts.size()) --bin;  // v == last edge
    ++counts[bin];
  }
  return counts;
}

Quartiles quartiles(const std::vector<double>& values) {
  return {quantile(values, 0.25), median(values), quantile(values, 0.75)};
}

TrialMedians trial_medians(const TrialRecord& trial) {
  if (trial.samples.empty()) {
    throw std::invalid_argument("trial " + std::to_string(trial.trial_index) + " of " +
                                trial.participant_key + " has no samples");
  }
  std::vector<Vector> hs, ms;
  std::vector<double> ch, cm;
  for (const auto& s : trial.samples) {
    hs.push_back(s.h);
    ms.push_back(s.m);
    ch.push_back(s.cost_H);
    cm.push_back(s.cost_M);
  }
  return {trial.participant_key, trial.trial_index, trial.alpha, vector_median(hs),
          vector_median(ms),     median(ch),          median(cm)};
}

SummaryStats summarize(const std::vector<TrialRecord>& trials, const EquilibriumSet& eq,
                       const SummaryOptions& opt) {
  SummaryStats out;
  out.equilibria = eq;
  out.bin_edges = opt.bin_edges;
  out.d_H = static_cast<int>(eq.nash.h.size());
  out.d_M = static_cast<int>(eq.nash.m.size());

  std::map<double, std::vector<const TrialRecord*>> by_alpha;
  for (const auto& t : trials) {
    if (t.samples.empty()) {
      throw std::invalid_argument("trial " + std::to_string(t.trial_index) + " of " +
                                  t.participant_key + " has no samples");
    }
    for (const auto& s : t.samples) {
      if (s.h.size() != out.d_H || s.m.size() != out.d_M) {
        throw std::invalid_argument("trial " + std::to_string(t.trial_index) + " of " +
                                    t.participant_key + " has dimensions " +
                                    std::to_string(s.h.size()) + "x" + std::to_string(s.m.size()) +
                                    ", expected " + std::to_string(out.d_H) + "x" +
                                    std::to_string(out.d_M));
      }
    }
    by_alpha[t.alpha].push_back(&t);
  }

  for (const auto& [alpha, group] : by_alpha) {
    AlphaSummary a;
    a.alpha = alpha;
    a.trials = group.size();
    std::vector<Vector> mh, mm;
    std::vector<double> ch, cm;
    std::vector<std::vector<double>> hv(static_cast<std::size_t>(out.d_H));
    std::vector<std::vector<double>> mv(static_cast<std::size_t>(out.d_M));
    for (const auto* t : group) {
      auto med = trial_medians(*t);
      mh.push_back(med.h);
      mm.push_back(med.m);
      if (opt.cost_statistic == CostStatistic::kTrialMedian) {
        ch.push_back(med.cost_H);
        cm.push_back(med.cost_M);
      }
      for (const auto& s : t->samples) {
        for (int i = 0; i < out.d_H; ++i) hv[static_cast<std::size_t>(i)].push_back(s.h[i]);
        for (int i = 0; i < out.d_M; ++i) mv[static_cast<std::size_t>(i)].push_back(s.m[i]);
        if (opt.cost_statistic == CostStatistic::kPerSample) {
          ch.push_back(s.cost_H);
          cm.push_back(s.cost_M);
        }
      }
      a.samples += t->samples.size();
      a.per_trial.push_back(std::move(med));
    }
    a.median_h = vector_median(mh);
    a.median_m = vector_median(mm);
    a.cost_H = quartiles(ch);
    a.cost_M = quartiles(cm);
    for (const auto& v : hv) a.hist_h.push_back(histogram(v, opt.bin_edges));
    for (const auto& v : mv) a.hist_m.push_back(histogram(v, opt.bin_edges));
    a.dist_h_ne = (a.median_h - eq.nash.h).norm();
    a.dist_h_se = (a.median_h - eq.stackelberg.h).norm();
    a.dist_m_ne = (a.median_m - eq.nash.m).norm();
    a.dist_m_se = (a.median_m - eq.stackelberg.m).norm();
    out.per_alpha.push_back(std::move(a));
  }
  return out;
}

SummaryStats analyze_trials(const std::vector<TrialRecord>& trials, const EquilibriumSet& eq,
                            double seconds, const SummaryOptions& options) {
  std::vector<TrialRecord> prepared;
  prepared.reserve(trials.size());
  for (const auto& t : trials) prepared.push_back(unmirror(trim_last_seconds(t, seconds)));
  return summarize(prepared, eq, options);
}

}  // namespace coadapt
