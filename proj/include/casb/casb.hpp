#pragma once

#include "casb/gibbs.hpp"
#include "casb/io.hpp"
#include "casb/matrix.hpp"
#include "casb/metrics.hpp"
#include "casb/rng.hpp"
#include "casb/select.hpp"
#include "casb/special_functions.hpp"
#include "casb/synth.hpp"
#include "casb/types.hpp"
#include "casb/vi.hpp"
