#pragma once

#include <string>

#include "proxi2s/simharness.hpp"

namespace proxi2s {

VarianceMethod variance_from_string(const std::string& name);
std::string to_string(VarianceMethod method);

// Study configuration in a small TOML subset: [study], [dgp], and [model]
// sections with scalar, string, boolean, and flat-array values. Unset keys
// keep the ss_default values.
StudyConfig parse_study_toml(const std::string& text);
StudyConfig load_study_config(const std::string& path);

}  // namespace proxi2s
