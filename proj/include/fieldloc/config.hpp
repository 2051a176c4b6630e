#pragma once

#include <iosfwd>
#include <string>

#include "fieldloc/pipeline.hpp"
#include "fieldloc/sim.hpp"

namespace fieldloc {

struct Config {
    PipelineConfig pipeline;
    FieldConfig field;
    NoiseConfig noise;
};

/// `key = value` lines; `#` starts a comment. Unknown keys are reported on
/// `warn`. Malformed lines throw FormatError with the line number; values
/// failing validation throw InvalidArgument.
Config parse_config(std::istream& in, std::ostream* warn = nullptr);
Config load_config(const std::string& path, std::ostream* warn = nullptr);

/// Every recognised key with its default, one per line.
std::string config_reference();

}  // namespace fieldloc
