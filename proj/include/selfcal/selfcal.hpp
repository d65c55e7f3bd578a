#pragma once

#include "selfcal/bench.hpp"
#include "selfcal/effectiveness.hpp"
#include "selfcal/error.hpp"
#include "selfcal/geometry.hpp"
#include "selfcal/imu_offset.hpp"
#include "selfcal/qcqp_oracle.hpp"
#include "selfcal/rigidbody.hpp"
#include "selfcal/sensor_log.hpp"
#include "selfcal/serialization.hpp"
#include "selfcal/sim.hpp"
#include "selfcal/thrust_frame.hpp"
