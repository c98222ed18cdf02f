#pragma once

#include <json.hpp>

namespace ssx {

// Finite-difference sweep over every differentiable operation and the full
// model paths. Each entry reports the max relative error across randomized
// instances against the 1e-4 gate. `negative_control` appends a check whose
// analytic gradient is deliberately wrong; it must fail, proving the harness
// can catch a broken backward rule.
nlohmann::json grad_check_report(bool negative_control = false);

bool grad_check_passed(const nlohmann::json& report);

}  // namespace ssx
