#pragma once

#include "mctl/config.hpp"
#include "mctl/dynamics.hpp"
#include "mctl/error.hpp"
#include "mctl/estimates.hpp"
#include "mctl/field.hpp"
#include "mctl/field_io.hpp"
#include "mctl/linalg.hpp"
#include "mctl/nonlinearity.hpp"
#include "mctl/report_json.hpp"
#include "mctl/runner.hpp"
#include "mctl/schedule.hpp"
#include "mctl/spectral.hpp"
#include "mctl/synthesis.hpp"
