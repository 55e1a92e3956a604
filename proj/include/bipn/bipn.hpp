#pragma once

#include "bipn/bitvector.hpp"
#include "bipn/distribution.hpp"
#include "bipn/errors.hpp"
#include "bipn/experiment.hpp"
#include "bipn/formula.hpp"
#include "bipn/fourier.hpp"
#include "bipn/generator.hpp"
#include "bipn/gf2m.hpp"
#include "bipn/harness.hpp"
#include "bipn/matrix.hpp"
#include "bipn/primitives.hpp"
#include "bipn/robp.hpp"
