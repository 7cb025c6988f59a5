#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace vpem {

// Traces are line-delimited JSON, one object per iteration, stable keys.
// Every record carries "mode" so merged files can be validated.
using TraceRecord = nlohmann::ordered_json;

std::string trace_to_string(const std::vector<TraceRecord>& records);
std::vector<TraceRecord> trace_from_string(const std::string& text);
void save_trace(const std::vector<TraceRecord>& records,
                const std::string& path);
std::vector<TraceRecord> load_trace(const std::string& path);

// Per-iteration log-likelihood column ("ll", or "ll_mean" for decentralized
// traces).
std::vector<double> trace_ll_column(const std::vector<TraceRecord>& records);

// Aligns runs per iteration, padding shorter runs with their last value;
// output CSV has one run column per trace plus a mean column. Throws
// IncompatibleTraces when modes differ, unless force is set.
std::string merge_trajectories(
    const std::vector<std::vector<TraceRecord>>& runs, bool force = false);

}  // namespace vpem
