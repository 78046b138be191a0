#pragma once

#include "hjmsplit/calibration.hpp"
#include "hjmsplit/convergence.hpp"
#include "hjmsplit/curve.hpp"
#include "hjmsplit/errors.hpp"
#include "hjmsplit/kv_config.hpp"
#include "hjmsplit/model.hpp"
#include "hjmsplit/parallel.hpp"
#include "hjmsplit/pricing.hpp"
#include "hjmsplit/qmc.hpp"
#include "hjmsplit/scheme.hpp"
#include "hjmsplit/splitting.hpp"
