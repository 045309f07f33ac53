#pragma once

#include "kfmot/association.hpp"
#include "kfmot/attack.hpp"
#include "kfmot/config.hpp"
#include "kfmot/defense.hpp"
#include "kfmot/error.hpp"
#include "kfmot/experiment.hpp"
#include "kfmot/gamma.hpp"
#include "kfmot/geometry.hpp"
#include "kfmot/kalman.hpp"
#include "kfmot/kitti_io.hpp"
#include "kfmot/metrics.hpp"
#include "kfmot/theory.hpp"
#include "kfmot/trace.hpp"
#include "kfmot/tracker.hpp"
