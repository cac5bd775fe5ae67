#pragma once

// File formats: CSV traces and tables, JSON reports, the class table text
// file.  Numbers are written with a fixed number of significant digits so
// that identical runs produce identical bytes.

#include <array>
#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <system_error>

#include <nlohmann/json.hpp>

#include "onn/decimal.hpp"
#include "onn/network.hpp"
#include "onn/patterns.hpp"
#include "onn/sync_metrics.hpp"
#include "onn/trainer.hpp"

namespace onn {

using json = nlohmann::json;

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

// Oscillogram: t_index,osc0_current,...,osc10_current  (amperes).
inline void write_oscillogram_csv(std::ostream& out,
                                  const std::array<std::vector<double>, kNumOscillators>& traces,
                                  const std::string& quantity = "current") {
  out << "t_index";
  for (std::size_t i = 0; i < kNumOscillators; ++i) out << ",osc" << i << '_' << quantity;
  out << '\n';
  const std::size_t n = traces[0].size();
  for (std::size_t t = 0; t < n; ++t) {
    out << t;
    for (std::size_t i = 0; i < kNumOscillators; ++i) out << ',' << fmt_num(traces[i][t], 9);
    out << '\n';
  }
}

// Pulse trains: osc_index,edge_t_index.
inline void write_pulse_trains_csv(std::ostream& out,
                                   const std::array<PulseTrain, kNumOscillators>& trains) {
  out << "osc_index,edge_t_index\n";
  for (std::size_t i = 0; i < kNumOscillators; ++i)
    for (auto t : trains[i]) out << i << ',' << t << '\n';
}

inline std::array<PulseTrain, kNumOscillators> read_pulse_trains_csv(std::istream& in) {
  std::array<PulseTrain, kNumOscillators> trains;
  std::string line;
  if (!std::getline(in, line) || line != "osc_index,edge_t_index")
    throw std::runtime_error("pulse-train CSV must start with 'osc_index,edge_t_index'");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    std::size_t osc = 0, t = 0;
    const auto r1 = std::from_chars(line.data(), line.data() + comma, osc);
    const auto r2 = comma == std::string::npos
                        ? std::from_chars_result{nullptr, std::errc::invalid_argument}
                        : std::from_chars(line.data() + comma + 1, line.data() + line.size(), t);
    if (r1.ec != std::errc{} || r2.ec != std::errc{} || osc >= kNumOscillators)
      throw std::runtime_error("malformed pulse-train row at line " + std::to_string(lineno));
    trains[osc].push_back(t);
  }
  return trains;
}

inline json shr_json(const SyncResult& r) {
  if (r.histogram.entries.empty()) return nullptr;
  return json::array({r.shr.m_j, r.shr.m_i});
}

// {shr: [Mj, Mi], shr_real, eta, synchronized, histogram: [[Mj, Mi, percent]...], n_periods}
inline json sync_result_json(const SyncResult& r) {
  json hist = json::array();
  for (const auto& e : r.histogram.entries)
    hist.push_back(json::array({e.ratio.m_j, e.ratio.m_i, snap_decimal(e.percent)}));
  json j;
  j["shr"] = shr_json(r);
  j["shr_real"] = r.histogram.entries.empty() ? json(nullptr) : json(snap_decimal(r.shr_value()));
  j["eta"] = snap_decimal(r.eta);
  j["synchronized"] = r.synchronized;
  j["histogram"] = std::move(hist);
  j["n_periods"] = r.n_periods_i;
  return j;
}

// One line per class: class_id,fill_count,orbit_size,member_indices...
inline void write_class_table(std::ostream& out, const ClassTable& table) {
  for (const auto& c : table.classes()) {
    out << c.id << ',' << c.fill_count << ',' << c.orbit_size();
    for (auto m : c.members) out << ',' << m;
    out << '\n';
  }
}

inline const char* kAttemptLogHeader = "step,attempt,i_on,i_off,i_0,i_10,s_r,s_m,s_o,p_value,valid";

inline void write_attempt_row(std::ostream& out, const AttemptRecord& a) {
  const auto& p = a.record.params;
  out << a.step << ',' << a.attempt << ',' << fmt_num(p.i_on) << ',' << fmt_num(p.i_off) << ','
      << fmt_num(p.i_0) << ',' << fmt_num(p.i_10) << ',' << fmt_num(p.s_r) << ','
      << fmt_num(p.s_m) << ',' << fmt_num(p.s_o) << ',' << a.record.p_value << ','
      << (a.record.valid ? 1 : 0) << '\n';
}

inline json params_json(const ParamSet& p) {
  return {{"i_on", snap_decimal(p.i_on)}, {"i_off", snap_decimal(p.i_off)},
          {"i_0", snap_decimal(p.i_0)},   {"i_10", snap_decimal(p.i_10)},
          {"s_r", snap_decimal(p.s_r)},   {"s_m", snap_decimal(p.s_m)},
          {"s_o", snap_decimal(p.s_o)},   {"u_n0", snap_decimal(p.u_n0)},
          {"eta_th", snap_decimal(p.eta_th)}};
}

inline json solution_json(const SolutionRecord& rec) {
  json mapping = json::array();
  for (const auto& m : rec.mapping)
    mapping.push_back({{"class_id", m.class_id},
                       {"shr", json::array({m.shr.m_j, m.shr.m_i})},
                       {"shr_real", snap_decimal(shr_real(m.shr))},
                       {"eta", snap_decimal(m.eta)}});
  json j;
  j["params"] = params_json(rec.params);
  j["seed"] = rec.seed;
  j["p_value"] = rec.p_value;
  j["valid"] = rec.valid;
  j["evaluated_classes"] = rec.evaluated_classes;
  j["duplicate"] = rec.duplicate ? json::array({rec.duplicate->first, rec.duplicate->second})
                                 : json(nullptr);
  j["mapping"] = std::move(mapping);
  j["shr_uniqueness"] = "exact integer pairs (2:4 and 1:2 are distinct states)";
  return j;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

}  // namespace onn
