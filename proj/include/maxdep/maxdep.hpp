#pragma once

#include "core.hpp"
#include "empirical.hpp"
#include "estimators.hpp"
#include "matrix.hpp"
#include "parallel.hpp"
#include "projection.hpp"
#include "random.hpp"
#include "simplex_grid.hpp"
#include "simulation.hpp"
#include "testing.hpp"

namespace maxdep {
inline constexpr const char* version = "1.0.0";
}
