#pragma once

#include "rboltz/analysis.hpp"
#include "rboltz/experiment.hpp"
#include "rboltz/kinematics.hpp"
#include "rboltz/nonlinear.hpp"
#include "rboltz/sweep.hpp"
#include "rboltz/vidav.hpp"
