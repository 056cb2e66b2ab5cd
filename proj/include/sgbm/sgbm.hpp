// Umbrella header.
#pragma once

#include "sgbm/bundling.hpp"
#include "sgbm/chf.hpp"
#include "sgbm/common.hpp"
#include "sgbm/config.hpp"
#include "sgbm/credit.hpp"
#include "sgbm/exposure.hpp"
#include "sgbm/model.hpp"
#include "sgbm/moments.hpp"
#include "sgbm/path_engine.hpp"
#include "sgbm/regression.hpp"
#include "sgbm/report_io.hpp"
#include "sgbm/rng.hpp"
#include "sgbm/runner.hpp"
