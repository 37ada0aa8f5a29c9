#pragma once

namespace lasersim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace lasersim
