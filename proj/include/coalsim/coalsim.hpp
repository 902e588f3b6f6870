#pragma once

// Umbrella header pulling in the whole library.

#include "coalsim/special.hpp"
#include "coalsim/quadrature.hpp"
#include "coalsim/random.hpp"
#include "coalsim/measure.hpp"
#include "coalsim/levy_kernel.hpp"
#include "coalsim/genealogy.hpp"
#include "coalsim/mutation.hpp"
#include "coalsim/asymptotics.hpp"
#include "coalsim/harness.hpp"
