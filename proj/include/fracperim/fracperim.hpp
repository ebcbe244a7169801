#pragma once

#include "common.hpp"
#include "curvature.hpp"
#include "experiments.hpp"
#include "io.hpp"
#include "kernel.hpp"
#include "lattice.hpp"
#include "minimizer.hpp"
#include "oracle.hpp"
#include "perimeter.hpp"
#include "potential.hpp"
