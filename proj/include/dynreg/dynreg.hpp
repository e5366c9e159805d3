#pragma once

// Everything except report.hpp, which needs nlohmann/json.

#include "dynreg/assumptions.hpp"
#include "dynreg/data.hpp"
#include "dynreg/errors.hpp"
#include "dynreg/inference.hpp"
#include "dynreg/lpcore.hpp"
#include "dynreg/matrices.hpp"
#include "dynreg/ordering.hpp"
#include "dynreg/regimes.hpp"
#include "dynreg/simulate.hpp"
#include "dynreg/statespace.hpp"
#include "dynreg/welfare.hpp"
