#pragma once

#include "orosoar/airframe.hpp"
#include "orosoar/control.hpp"
#include "orosoar/equilibrium.hpp"
#include "orosoar/error.hpp"
#include "orosoar/glide_polar.hpp"
#include "orosoar/scenario_io.hpp"
#include "orosoar/sim.hpp"
#include "orosoar/tgl.hpp"
#include "orosoar/wind_field.hpp"
#include "orosoar/zeuc.hpp"
