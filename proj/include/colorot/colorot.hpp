#pragma once

// Solver headers (no PNG or JSON dependency; see colorot/io.hpp for those).

#include "colorot/grid.hpp"
#include "colorot/transforms.hpp"
#include "colorot/operators.hpp"
#include "colorot/linear_solvers.hpp"
#include "colorot/prox.hpp"
#include "colorot/engine.hpp"
