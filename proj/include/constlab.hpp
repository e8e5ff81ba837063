#pragma once

#include "constlab/boxnorm.hpp"
#include "constlab/constellations.hpp"
#include "constlab/errors.hpp"
#include "constlab/forms.hpp"
#include "constlab/lattice.hpp"
#include "constlab/measures.hpp"
#include "constlab/numeric.hpp"
#include "constlab/parallel.hpp"
#include "constlab/sieve.hpp"
#include "constlab/weights.hpp"
#include "constlab/wtrick.hpp"
