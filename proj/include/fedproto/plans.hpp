#pragma once

#include <string>
#include <vector>

#include "fedproto/orchestrator.hpp"

namespace fedproto {

std::vector<std::string> builtin_plan_names();

/// Named federation plans: "optalgo-a", "optalgo-b", "optalgo-c" and the
/// two-phase "rolepro-submission". Cost model and budget keep their defaults
/// and can be overridden by the caller.
FederationPlan builtin_plan(const std::string& name);

}  // namespace fedproto
