#pragma once

#include "portopt/errors.hpp"
#include "portopt/types.hpp"
#include "portopt/rng.hpp"
#include "portopt/io.hpp"
#include "portopt/instances.hpp"
#include "portopt/synthetic.hpp"
#include "portopt/model.hpp"
#include "portopt/qubo.hpp"
#include "portopt/budget.hpp"
#include "portopt/samples.hpp"
#include "portopt/heuristics.hpp"
#include "portopt/qaoa.hpp"
#include "portopt/refsolver.hpp"
#include "portopt/bench.hpp"
