#pragma once

#include "stochheat/core.hpp"
#include "stochheat/quadrature.hpp"
#include "stochheat/spectral_core.hpp"
#include "stochheat/noise_grid.hpp"
#include "stochheat/fem1d.hpp"
#include "stochheat/deterministic_cn.hpp"
#include "stochheat/spde_solvers.hpp"
#include "stochheat/error_lab.hpp"
#include "stochheat/study.hpp"
