#pragma once

#include "locus/bench.hpp"
#include "locus/core.hpp"
#include "locus/error.hpp"
#include "locus/gradient.hpp"
#include "locus/io.hpp"
#include "locus/layers.hpp"
#include "locus/neighborhood.hpp"
#include "locus/parallel.hpp"
#include "locus/smooth.hpp"
#include "locus/solver.hpp"
