#pragma once

// Outside-share-robust identification and inference for random-coefficients
// logit demand.

#include "blpid/config.hpp"
#include "blpid/core.hpp"
#include "blpid/dataset_io.hpp"
#include "blpid/directions.hpp"
#include "blpid/errors.hpp"
#include "blpid/grid_result.hpp"
#include "blpid/identified_set.hpp"
#include "blpid/inference.hpp"
#include "blpid/instruments.hpp"
#include "blpid/inversion.hpp"
#include "blpid/parallel.hpp"
#include "blpid/quadrature.hpp"
#include "blpid/share_map.hpp"
#include "blpid/simulation.hpp"
