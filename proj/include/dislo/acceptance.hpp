#pragma once

#include "dislo/io.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dislo {

struct AcceptanceOptions {
  std::uint64_t seed = 20240611;
  int workers = 1;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::vector<std::pair<std::string, bool>> checks;  // every hard check
  std::vector<std::string> flags;                    // reported, not failed
  Json report;                                       // deterministic content only
  double seconds = 0.0;
};

/// Criteria 1..10; 11 needs the reports of a previous run, see determinism_check.
CriterionResult run_criterion(int id, const AcceptanceOptions& opt);

/// Re-runs criteria 3..9 and compares their JSON byte-for-byte with `first` (id -> dump).
CriterionResult determinism_check(const std::map<int, std::string>& first, const AcceptanceOptions& opt);

/// All criteria in order; criterion 11 reuses the reports of the first pass.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt, const std::vector<int>& only = {});

/// "criterion N ... PASS|FAIL" line with the failing checks and the flags.
std::string summary_line(const CriterionResult& r);

Json to_json(const CriterionResult& r);

}  // namespace dislo
