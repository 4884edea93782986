#pragma once

#include "jdsim/analysis.hpp"
#include "jdsim/assumptions.hpp"
#include "jdsim/linalg.hpp"
#include "jdsim/models.hpp"
#include "jdsim/noise.hpp"
#include "jdsim/noise_io.hpp"
#include "jdsim/parallel.hpp"
#include "jdsim/rng.hpp"
#include "jdsim/schemes.hpp"
#include "jdsim/sde_core.hpp"
#include "jdsim/version.hpp"
