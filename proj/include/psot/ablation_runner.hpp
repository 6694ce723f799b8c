// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <exception>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "psot/ablation.hpp"
#include "psot/training.hpp"

namespace psot {

struct AblationRow {
  std::string grid;
  std::string name;
  bool ok = false;
  RunReport report;
  std::string error;  // set when !ok
};

// Trains and evaluates every configuration; a failing row is recorded and
// the remaining rows still run.
template <std::floating_point S>
std::vector<AblationRow> run_ablations(const std::vector<FeatureBundle<S>>& data, const std::vector<NamedConfig>& configs,
                                       const TrainConfig& tc,
                                       const std::function<void(const AblationRow&)>& on_row = nullptr) {
  std::vector<AblationRow> rows;
  rows.reserve(configs.size());
  for (const auto& nc : configs) {
    AblationRow row{nc.grid, nc.name, false, {}, {}};
    try {
      row.report = train(data, nc.config, tc).report;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

// Timing is left out so that identical runs give identical bytes.
inline void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "grid,config,status,final_loss,final_train_accuracy,final_accuracy,fingerprint,error\n";
  for (const auto& r : rows) {
    const double loss = r.ok && !r.report.epoch_loss.empty() ? r.report.epoch_loss.back() : 0.0;
    out << detail::csv_field(r.grid) << ',' << detail::csv_field(r.name) << ',' << (r.ok ? "ok" : "error") << ','
        << (r.ok ? detail::csv_number(loss) : "") << ','
        << (r.ok ? detail::csv_number(r.report.final_train_accuracy) : "") << ','
        << (r.ok ? detail::csv_number(r.report.final_accuracy) : "") << ',' << r.report.fingerprint << ','
        << detail::csv_field(r.error) << '\n';
  }
}

}  // namespace psot
