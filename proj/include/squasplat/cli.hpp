#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "squasplat/viewgeom.hpp"

namespace squasplat {

// Runs one command line (args excludes the program name). Returns 0 on
// success, 2 on usage errors and 1 on runtime failures; failures print a
// single "error: <message>" line to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

// Six 160x90 pinhole cameras at 1.5 m height, yawed every 60 degrees
// starting forward (+x).
std::vector<CameraModel> default_rig();

}  // namespace squasplat
