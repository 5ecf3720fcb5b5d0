#pragma once

#include "mpstomo/errors.hpp"
#include "mpstomo/types.hpp"
#include "mpstomo/rng.hpp"
#include "mpstomo/pauli.hpp"
#include "mpstomo/mps.hpp"
#include "mpstomo/mps_io.hpp"
#include "mpstomo/mpo.hpp"
#include "mpstomo/lattice.hpp"
#include "mpstomo/hamiltonians.hpp"
#include "mpstomo/dmrg.hpp"
#include "mpstomo/measurement.hpp"
#include "mpstomo/shadows.hpp"
#include "mpstomo/lbfgs.hpp"
#include "mpstomo/training.hpp"
#include "mpstomo/evaluation.hpp"
