#pragma once

#include "bittide/afm.hpp"
#include "bittide/analysis.hpp"
#include "bittide/errors.hpp"
#include "bittide/graph.hpp"
#include "bittide/numerics.hpp"
#include "bittide/ode_model.hpp"
#include "bittide/scenario_io.hpp"
