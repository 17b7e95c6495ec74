#pragma once

#include "starch/panel.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace starch {

struct PanelReadOptions {
    bool month_dummies = false;  ///< from a "date" column (YYYY-MM or YYYY-MM-DD)
    bool year_dummies = false;
    bool drop_zero_units = false;
};

struct PanelFile {
    Panel panel;
    std::vector<std::string> unit_ids;  ///< row order of the panel
    long first_time = 0;                ///< time index of column 0
    std::vector<std::string> x_names;
    Warnings warnings;
};

/**
 * Long-format CSV with header unit,time,y,x1..xk (extra "date" column allowed).
 * Every (unit, time) pair must appear once and times must be contiguous. The
 * earliest period supplies Y_0 and its regressors may be NA.
 */
PanelFile read_panel_csv(const std::filesystem::path& path, const PanelReadOptions& opts = {});

/// Writes the panel with %.17g values (exact round trip); x is NA at time 0.
void write_panel_csv(const Panel& panel, const std::filesystem::path& path,
                     const std::vector<std::string>& x_names = {});

}  // namespace starch
