#pragma once

#include "mnl/error.hpp"
#include "mnl/rng.hpp"
#include "mnl/core.hpp"
#include "mnl/mdp.hpp"
#include "mnl/constants.hpp"
#include "mnl/instances.hpp"
#include "mnl/ellipsoid.hpp"
#include "mnl/exploration.hpp"
#include "mnl/omd.hpp"
#include "mnl/planner.hpp"
#include "mnl/harness.hpp"
#include "mnl/serialization.hpp"
#include "mnl/config.hpp"
