#pragma once

#include "redspace/optimizer.hpp"

#include <string>

namespace redspace {

/// Render a double with 17 significant digits so text round-trips bit-exactly.
std::string format_double(double v);

/// CSV with header k,seed,method,s_1..s_{d_s},y_1..y_{d_y},feasible,incumbent,
/// one row per evaluation.
std::string trace_to_csv(const Trace& trace);
Trace trace_from_csv(const std::string& text);

/// JSON form carrying the per-iteration model digests as well.
std::string trace_to_json(const Trace& trace);

}  // namespace redspace
