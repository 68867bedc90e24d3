#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace largesol {

struct VerifyOptions {
    bool full = false;
    // Fault injection: solver rtol override (polishing off).
    std::optional<double> tamper_rtol;
    std::string config_dir;  // shipped configs for the ladder-monotonicity sweep
};

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    nlohmann::json metrics = nlohmann::json::object();
    double seconds = 0.0;
};

struct VerifyReport {
    std::string suite;
    std::vector<CriterionResult> results;
    bool passed() const;
};

// Criterion ids 1..11; the fast suite runs 1, 2, 3 and 11.
std::vector<int> suite_criteria(bool full);
std::string criterion_name(int id);
CriterionResult run_criterion(int id, const VerifyOptions& opts);

VerifyReport verify(const VerifyOptions& opts, const std::function<void(const CriterionResult&)>& on_result = {});

// Deterministic: no timings.
nlohmann::json report_json(const VerifyReport& report);

std::string default_config_dir();

}  // namespace largesol
