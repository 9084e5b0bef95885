#ifndef POSEBENCH_POSEBENCH_HPP
#define POSEBENCH_POSEBENCH_HPP

#include "posebench/bench.hpp"
#include "posebench/error.hpp"
#include "posebench/geometry.hpp"
#include "posebench/io.hpp"
#include "posebench/keyframe.hpp"
#include "posebench/metrics.hpp"
#include "posebench/random.hpp"
#include "posebench/scene_synth.hpp"
#include "posebench/sfm/bundle_adjust.hpp"
#include "posebench/sfm/pnp.hpp"
#include "posebench/sfm/two_view.hpp"
#include "posebench/sfm/window_sfm.hpp"
#include "posebench/tracker_sim.hpp"
#include "posebench/trajgen.hpp"
#include "posebench/uncertainty.hpp"

#endif  // POSEBENCH_POSEBENCH_HPP
