#pragma once

/**
 * @file ddswitch.hpp
 * @brief Umbrella header. File formats live in io.hpp, which also needs the
 *        vendored JSON header on the include path.
 */

#include "ddswitch/analysis.hpp"
#include "ddswitch/controller.hpp"
#include "ddswitch/data.hpp"
#include "ddswitch/detection.hpp"
#include "ddswitch/linalg.hpp"
#include "ddswitch/lmi.hpp"
#include "ddswitch/phase.hpp"
#include "ddswitch/plant.hpp"
#include "ddswitch/scenario.hpp"
#include "ddswitch/simulate.hpp"
