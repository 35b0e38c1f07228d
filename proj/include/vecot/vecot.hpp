#pragma once

#include "vecot/error.hpp"
#include "vecot/parallel.hpp"
#include "vecot/core.hpp"
#include "vecot/solver.hpp"
#include "vecot/certifier.hpp"
#include "vecot/leaves.hpp"
#include "vecot/mass_balance.hpp"
#include "vecot/disintegration.hpp"
#include "vecot/io.hpp"
