#pragma once

namespace depthpl {

// Scalar type for every tensor, depth map and image. 64-bit unless the
// library is configured with DEPTHPL_USE_FLOAT (speed experiments only).
#ifdef DEPTHPL_USE_FLOAT
using Real = float;
inline constexpr bool kDoublePrecision = false;
#else
using Real = double;
inline constexpr bool kDoublePrecision = true;
#endif

}  // namespace depthpl
