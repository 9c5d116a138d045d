#pragma once

#include <string>

namespace mds {

/// Writes "warning: <msg>" to stderr unless warnings are silenced.
void warn(const std::string& msg);
void set_warnings_enabled(bool enabled);

}  // namespace mds
