#include "embnli/init.hpp"

namespace embnli {

std::string_view to_string(InitScheme s) { return s == InitScheme::gaussian ? "gaussian" : "orthogonal"; }

InitScheme parse_init_scheme(std::string_view name) {
  if (name == "gaussian") return InitScheme::gaussian;
  if (name == "orthogonal" || name == "orthonormal") return InitScheme::orthogonal;
  throw UsageError("unknown init scheme '" + std::string(name) + "' (expected gaussian|orthogonal)");
}

}  // namespace embnli
