// Umbrella header.
#pragma once

#include "mfl/common.hpp"
#include "mfl/convergence.hpp"
#include "mfl/kernel.hpp"
#include "mfl/measure.hpp"
#include "mfl/models.hpp"
#include "mfl/rdp.hpp"
#include "mfl/sampling.hpp"
#include "mfl/state_box.hpp"
#include "mfl/system.hpp"
#include "mfl/transport.hpp"
