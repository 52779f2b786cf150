#pragma once

namespace parhom {
inline constexpr const char* kArtifactVersion = "0.1.0";
}
