// Convenience umbrella header.
#pragma once

#include "slogen/adam.hpp"
#include "slogen/checkpoint.hpp"
#include "slogen/corpus.hpp"
#include "slogen/error.hpp"
#include "slogen/harness.hpp"
#include "slogen/metrics.hpp"
#include "slogen/model.hpp"
#include "slogen/perturb.hpp"
#include "slogen/rng.hpp"
#include "slogen/tensor.hpp"
