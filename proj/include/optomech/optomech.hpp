#pragma once

#include "optomech/errors.hpp"
#include "optomech/units.hpp"
#include "optomech/model.hpp"
#include "optomech/gaussian.hpp"
#include "optomech/dynamics.hpp"
#include "optomech/random.hpp"
#include "optomech/stochastic.hpp"
#include "optomech/protocols.hpp"
#include "optomech/validation.hpp"
#include "optomech/config.hpp"
#include "optomech/cli.hpp"
