#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace riskbench {

// Accumulates non-fatal diagnostics; callers pass nullptr to discard them.
using WarningSink = std::vector<std::string>;

void warn(WarningSink* sink, std::string message);

// Runs fn(i) for i in [0,n). Work is split into contiguous blocks so results
// never depend on the thread count; threads <= 1 runs inline.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn);

// Thread count resolution: explicit argument wins, then RISKBENCH_THREADS,
// then the hardware concurrency.
int resolve_threads(int requested);

// Writes via a sibling temp file and renames, so readers never observe a
// partially written artifact.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// Fixed-format float for artifacts; round trips are handled by the JSON layer,
// this is for CSV/SVG text where a stable textual form matters.
std::string format_double(double v, int precision = 17);
std::string format_fixed(double v, int decimals);

// Shortest decimal string that parses back to exactly v.
std::string format_shortest(double v);

bool nearly_equal(double a, double b, double rel_tol, double abs_tol = 0.0);

}  // namespace riskbench
