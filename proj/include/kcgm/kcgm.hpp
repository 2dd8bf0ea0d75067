#pragma once

#include "kcgm/core.hpp"
#include "kcgm/diagnostics.hpp"
#include "kcgm/kernel.hpp"
#include "kcgm/krylov.hpp"
#include "kcgm/reduce.hpp"
#include "kcgm/rng.hpp"
#include "kcgm/sketch.hpp"
#include "kcgm/solver.hpp"
