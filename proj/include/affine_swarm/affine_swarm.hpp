#pragma once

#include "affine_swarm/control.hpp"
#include "affine_swarm/core.hpp"
#include "affine_swarm/estimator.hpp"
#include "affine_swarm/formation.hpp"
#include "affine_swarm/frameworks.hpp"
#include "affine_swarm/graph.hpp"
#include "affine_swarm/indicator.hpp"
#include "affine_swarm/kalman.hpp"
#include "affine_swarm/ral.hpp"
#include "affine_swarm/rng.hpp"
#include "affine_swarm/sim.hpp"
#include "affine_swarm/stress.hpp"
