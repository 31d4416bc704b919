#pragma once

// Umbrella header: sublinear percentile-sampling trigger detection for
// scalar fields evolving over simulation time.

#include "qtrig/errors.hpp"     // IWYU pragma: export
#include "qtrig/field.hpp"      // IWYU pragma: export
#include "qtrig/indicator.hpp"  // IWYU pragma: export
#include "qtrig/io.hpp"         // IWYU pragma: export
#include "qtrig/quantile.hpp"   // IWYU pragma: export
#include "qtrig/report.hpp"     // IWYU pragma: export
#include "qtrig/rng.hpp"        // IWYU pragma: export
#include "qtrig/scenario.hpp"   // IWYU pragma: export
#include "qtrig/series.hpp"     // IWYU pragma: export
#include "qtrig/trigger.hpp"    // IWYU pragma: export
#include "qtrig/version.hpp"    // IWYU pragma: export
