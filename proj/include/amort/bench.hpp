#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace amort {

// Scripted comparisons behind `bench` and the acceptance suite. Every suite
// writes a JSON report plus per-iteration CSV curves into `out_dir` and
// returns the report. `scale` in (0, 1] shrinks the training budgets for
// smoke runs; 1 is the shipped configuration.
nlohmann::json run_bench_suite(const std::string& suite, const std::filesystem::path& out_dir,
                               std::uint64_t seed, double scale = 1.0);

}  // namespace amort
