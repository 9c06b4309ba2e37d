#pragma once

#include "rmbound/bounds.hpp"
#include "rmbound/coeffs.hpp"
#include "rmbound/error.hpp"
#include "rmbound/estimate.hpp"
#include "rmbound/experiments.hpp"
#include "rmbound/format.hpp"
#include "rmbound/matrix.hpp"
#include "rmbound/moments.hpp"
#include "rmbound/parallel.hpp"
#include "rmbound/rng.hpp"
#include "rmbound/sampling.hpp"
#include "rmbound/specnorm.hpp"
