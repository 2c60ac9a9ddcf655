#pragma once

// Umbrella header for the implet toolkit.

#include "implet/attribution.hpp"
#include "implet/cohort.hpp"
#include "implet/core.hpp"
#include "implet/error.hpp"
#include "implet/extraction.hpp"
#include "implet/faithfulness.hpp"
#include "implet/models.hpp"
#include "implet/removal.hpp"
#include "implet/synth.hpp"
#include "implet/tsdist.hpp"
#include "implet/ucr_io.hpp"

namespace implet {
inline constexpr const char* version = "0.1.0";
}
