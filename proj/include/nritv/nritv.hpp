#pragma once

#include "nritv/config.hpp"
#include "nritv/core.hpp"
#include "nritv/fft.hpp"
#include "nritv/io.hpp"
#include "nritv/metrics.hpp"
#include "nritv/operators.hpp"
#include "nritv/parallel.hpp"
#include "nritv/prox.hpp"
#include "nritv/random.hpp"
#include "nritv/sim.hpp"
#include "nritv/solver.hpp"
