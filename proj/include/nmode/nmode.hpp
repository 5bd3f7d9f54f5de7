#pragma once

#include "nmode/commands.hpp"
#include "nmode/environment.hpp"
#include "nmode/environments.hpp"
#include "nmode/evolution.hpp"
#include "nmode/genome.hpp"
#include "nmode/hexapod.hpp"
#include "nmode/mutation.hpp"
#include "nmode/network.hpp"
#include "nmode/oscillator.hpp"
#include "nmode/rng.hpp"
#include "nmode/run_config.hpp"
#include "nmode/xml.hpp"
