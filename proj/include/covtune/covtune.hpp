#pragma once

#include "covtune/assimilation.hpp"
#include "covtune/calibration.hpp"
#include "covtune/chain.hpp"
#include "covtune/commands.hpp"
#include "covtune/config.hpp"
#include "covtune/errors.hpp"
#include "covtune/io.hpp"
#include "covtune/kernels.hpp"
#include "covtune/obs_operator.hpp"
#include "covtune/rng.hpp"
#include "covtune/shallow_water.hpp"
#include "covtune/spd.hpp"
#include "covtune/tracker.hpp"
#include "covtune/twin.hpp"
