#pragma once

// Tabular export of trial records, shared by the server and the analysis
// reader.

#include "coadapt/protocol.hpp"

#include <iosfwd>

namespace coadapt {

inline constexpr const char* kExportHeader =
    "pubkey,t,h_1,h_2,m_1,m_2,cost_H,cost_M,alpha,trial_index,s_1,s_2";

/// Appends one row per sample (no header) with 17 significant digits and
/// empty fields for absent dimensions. Returns the number of rows.
std::size_t write_export_rows(std::ostream& out, const TrialRecord& record);

}  // namespace coadapt
