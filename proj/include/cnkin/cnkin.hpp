#pragma once

#include "cnkin/commands.hpp"
#include "cnkin/correlation.hpp"
#include "cnkin/csv.hpp"
#include "cnkin/errors.hpp"
#include "cnkin/existence.hpp"
#include "cnkin/grid.hpp"
#include "cnkin/kernel.hpp"
#include "cnkin/moment_oracle.hpp"
#include "cnkin/operators.hpp"
#include "cnkin/picard.hpp"
#include "cnkin/scenario.hpp"
#include "cnkin/source.hpp"
#include "cnkin/spectrum.hpp"
#include "cnkin/time_integration.hpp"
