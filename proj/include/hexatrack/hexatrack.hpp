#pragma once

// Everything in one include.

#include "hexatrack/controller.hpp"
#include "hexatrack/error.hpp"
#include "hexatrack/feature_match.hpp"
#include "hexatrack/fft.hpp"
#include "hexatrack/gait_sim.hpp"
#include "hexatrack/image.hpp"
#include "hexatrack/image_io.hpp"
#include "hexatrack/imgproc.hpp"
#include "hexatrack/kcf_track.hpp"
#include "hexatrack/motion_comp.hpp"
#include "hexatrack/params.hpp"
#include "hexatrack/plot.hpp"
#include "hexatrack/pose.hpp"
#include "hexatrack/rcp.hpp"
#include "hexatrack/region_detect.hpp"
#include "hexatrack/runs.hpp"
#include "hexatrack/scene_presets.hpp"
#include "hexatrack/scene_sim.hpp"
#include "hexatrack/teleop/messages.hpp"
#include "hexatrack/teleop/server.hpp"
#include "hexatrack/teleop/session.hpp"
