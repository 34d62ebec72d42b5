#pragma once

#include "hrseg/archcalc.hpp"
#include "hrseg/config.hpp"
#include "hrseg/core.hpp"
#include "hrseg/decision.hpp"
#include "hrseg/gcn.hpp"
#include "hrseg/io.hpp"
#include "hrseg/losses.hpp"
#include "hrseg/metrics.hpp"
#include "hrseg/parallel.hpp"
#include "hrseg/presets.hpp"
#include "hrseg/random.hpp"
#include "hrseg/smoothing.hpp"
