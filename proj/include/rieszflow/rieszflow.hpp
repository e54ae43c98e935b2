#pragma once

// Umbrella header: the whole library.

#include "asymptotics.hpp"
#include "config.hpp"
#include "energy.hpp"
#include "errors.hpp"
#include "evolve.hpp"
#include "grid.hpp"
#include "params.hpp"
#include "riesz.hpp"
#include "rng.hpp"
#include "steady.hpp"
