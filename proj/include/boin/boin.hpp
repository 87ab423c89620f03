#pragma once

// Everything except the HTTP service (which pulls in cpp-httplib).

#include "boin/beta.hpp"
#include "boin/design.hpp"
#include "boin/drm.hpp"
#include "boin/elicit.hpp"
#include "boin/error.hpp"
#include "boin/io.hpp"
#include "boin/json_io.hpp"
#include "boin/link.hpp"
#include "boin/nelder_mead.hpp"
#include "boin/parallel.hpp"
#include "boin/pava.hpp"
#include "boin/rng.hpp"
#include "boin/sim.hpp"
#include "boin/sweep.hpp"
#include "boin/trial.hpp"
