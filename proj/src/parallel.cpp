#include "squasplat/parallel.hpp"

#include <cstdlib>
#include <string>

namespace squasplat {

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SQUASPLAT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
      // Fall through to the hardware default.
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace squasplat
