#pragma once

#include "starch/estimators.hpp"

#include <filesystem>
#include <string>

namespace starch {

/// Machine-readable fit report (estimates, SEs, t-stats, ladder, diagnostics).
std::string fit_report_json(const GmmFit& fit);

/// Aligned human-readable fit report.
std::string fit_report_text(const GmmFit& fit);

/// Reads the estimate vector back from a JSON fit report.
Vector read_fit_theta(const std::filesystem::path& path, const ModelSpec& spec);

/// Per-location ACF table and per-period Moran's I as two CSV documents.
std::string acf_csv(const Diagnostics& d);
std::string moran_csv(const Diagnostics& d);
std::string diagnostics_text(const Diagnostics& d);

}  // namespace starch
