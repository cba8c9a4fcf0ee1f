#pragma once

#include "shadex/complete.hpp"
#include "shadex/components.hpp"
#include "shadex/descriptors.hpp"
#include "shadex/error.hpp"
#include "shadex/integrate.hpp"
#include "shadex/io.hpp"
#include "shadex/metrics.hpp"
#include "shadex/pipeline.hpp"
#include "shadex/raster.hpp"
#include "shadex/solver.hpp"
#include "shadex/synth.hpp"
