#pragma once

#include "crossbid/config.hpp"                // IWYU pragma: export
#include "crossbid/baselines/cem.hpp"         // IWYU pragma: export
#include "crossbid/baselines/pid.hpp"         // IWYU pragma: export
#include "crossbid/bottom/expectile.hpp"      // IWYU pragma: export
#include "crossbid/bottom/policies.hpp"       // IWYU pragma: export
#include "crossbid/bottom/reward.hpp"         // IWYU pragma: export
#include "crossbid/bottom/value.hpp"          // IWYU pragma: export
#include "crossbid/cmck/cmck.hpp"             // IWYU pragma: export
#include "crossbid/eval/evaluate.hpp"         // IWYU pragma: export
#include "crossbid/eval/metrics.hpp"          // IWYU pragma: export
#include "crossbid/eval/model.hpp"            // IWYU pragma: export
#include "crossbid/eval/pipeline.hpp"         // IWYU pragma: export
#include "crossbid/eval/report.hpp"           // IWYU pragma: export
#include "crossbid/eval/strategy.hpp"         // IWYU pragma: export
#include "crossbid/logs/behavior.hpp"         // IWYU pragma: export
#include "crossbid/logs/build.hpp"            // IWYU pragma: export
#include "crossbid/logs/io.hpp"               // IWYU pragma: export
#include "crossbid/nn/adam.hpp"               // IWYU pragma: export
#include "crossbid/nn/checkpoint.hpp"         // IWYU pragma: export
#include "crossbid/nn/mlp.hpp"                // IWYU pragma: export
#include "crossbid/sim/world.hpp"             // IWYU pragma: export
#include "crossbid/top/allocation.hpp"        // IWYU pragma: export
#include "crossbid/top/critic.hpp"            // IWYU pragma: export
#include "crossbid/top/policy.hpp"            // IWYU pragma: export
#include "crossbid/top/schedule.hpp"          // IWYU pragma: export
#include "crossbid/top/trainer.hpp"           // IWYU pragma: export
