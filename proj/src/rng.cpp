#include "slhoi/rng.hpp"

#include <cstring>
#include <sstream>

namespace slhoi {

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_;
  os << " " << (has_spare_ ? 1 : 0);
  if (has_spare_) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(spare_));
    std::memcpy(&bits, &spare_, sizeof(bits));
    os << " " << bits;
  }
  return os.str();
}

Rng Rng::deserialize(const std::string& text) {
  Rng r;
  std::istringstream is(text);
  is >> r.engine_;
  int flag = 0;
  is >> flag;
  r.has_spare_ = flag != 0;
  if (r.has_spare_) {
    std::uint64_t bits = 0;
    is >> bits;
    std::memcpy(&r.spare_, &bits, sizeof(bits));
  }
  return r;
}

}  // namespace slhoi
