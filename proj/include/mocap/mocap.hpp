#pragma once

#include "mocap/anthro.hpp"
#include "mocap/augment.hpp"
#include "mocap/calib.hpp"
#include "mocap/error.hpp"
#include "mocap/filt.hpp"
#include "mocap/io.hpp"
#include "mocap/kin.hpp"
#include "mocap/parallel.hpp"
#include "mocap/pipeline.hpp"
#include "mocap/rig.hpp"
#include "mocap/synth.hpp"
#include "mocap/triang.hpp"
#include "mocap/types.hpp"

namespace mocap {
inline constexpr const char* kVersion = "0.1.0";
}
