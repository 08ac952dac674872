#pragma once

// Forward variable selection for varying coefficient models.

#include "vcfs/error.hpp"
#include "vcfs/spline.hpp"
#include "vcfs/regression.hpp"
#include "vcfs/dataset.hpp"
#include "vcfs/selector.hpp"
#include "vcfs/simulation.hpp"
#include "vcfs/scenario.hpp"
#include "vcfs/report.hpp"
