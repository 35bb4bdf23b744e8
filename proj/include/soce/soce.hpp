#pragma once

#include "soce/baselines.hpp"
#include "soce/cell_sim.hpp"
#include "soce/data.hpp"
#include "soce/errors.hpp"
#include "soce/harness.hpp"
#include "soce/linalg.hpp"
#include "soce/lm.hpp"
#include "soce/metrics.hpp"
#include "soce/narx.hpp"
#include "soce/rng.hpp"
#include "soce/text.hpp"
