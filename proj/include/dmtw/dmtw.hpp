#pragma once

#include "dmtw/error.hpp"
#include "dmtw/grid.hpp"
#include "dmtw/wavefunction.hpp"
#include "dmtw/fourier.hpp"
#include "dmtw/signal_prep.hpp"
#include "dmtw/random.hpp"
#include "dmtw/apparatus.hpp"
#include "dmtw/reconstruct.hpp"
#include "dmtw/analysis.hpp"
#include "dmtw/io.hpp"
#include "dmtw/scenario.hpp"
