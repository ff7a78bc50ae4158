#pragma once

namespace dsol {
inline constexpr const char* version = "0.1.0";
}
