#pragma once

// Core library: model, τ transform, dynamics and chirp designer.
// rabichirp/config.hpp and rabichirp/cli.hpp additionally need yaml-cpp.
#include "rabichirp/designer.hpp"
#include "rabichirp/dynamics.hpp"
#include "rabichirp/errors.hpp"
#include "rabichirp/io.hpp"
#include "rabichirp/model.hpp"
#include "rabichirp/ode.hpp"
#include "rabichirp/quadrature.hpp"
#include "rabichirp/time_function.hpp"
#include "rabichirp/transform.hpp"
