#pragma once

// Umbrella header.

#include "cascade/errors.hpp"
#include "cascade/gaussian.hpp"
#include "cascade/sigma_points.hpp"
#include "cascade/so3.hpp"
#include "cascade/filters/kalman.hpp"
#include "cascade/filters/cascade.hpp"
#include "cascade/filters/linearized.hpp"
#include "cascade/filters/ahrs.hpp"
#include "cascade/filters/full_spkf.hpp"
#include "cascade/scenarios/linear_toy.hpp"
#include "cascade/scenarios/imu_uwb.hpp"
#include "cascade/eval/metrics.hpp"
#include "cascade/eval/trials.hpp"
#include "cascade/eval/runner.hpp"
#include "cascade/eval/io.hpp"
#include "cascade/eval/replay.hpp"
