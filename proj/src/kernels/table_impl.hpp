#pragma once

#include "freenoise/kernels.hpp"

// Internal: per-backend kernel tables. Each .cpp in this directory defines
// one; dispatch.cpp picks the active one.

namespace freenoise::kernels {

const Table& scalar_table();

#if defined(__x86_64__) || defined(_M_X64)
const Table& avx2_table();
#endif

#if defined(__aarch64__)
const Table& neon_table();
#endif

}  // namespace freenoise::kernels
