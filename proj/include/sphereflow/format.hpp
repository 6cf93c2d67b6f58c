#pragma once

#include <string>

namespace sphereflow {

// Shortest round-trippable decimal for a double ("%.17g"), used everywhere a
// floating value is written out so emitted documents are byte-stable.
std::string format_double(double v);

} // namespace sphereflow
