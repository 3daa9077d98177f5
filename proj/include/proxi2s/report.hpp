#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>

#include "proxi2s/inference.hpp"
#include "proxi2s/proximal.hpp"
#include "proxi2s/simharness.hpp"

namespace proxi2s {

// Serialized result of a two-stage fit. Assembled once as JSON so the
// print/parse round trip is exact; floats carry shortest round-trip form.
nlohmann::json fit_report_json(const Dataset& data, const TwoStageFit& fit,
                               const SandwichResult* sandwich_result,
                               const BootstrapResult* bootstrap_result,
                               double ci_level);

nlohmann::json sim_report_json(const SimReport& report);

}  // namespace proxi2s
