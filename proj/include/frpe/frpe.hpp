#pragma once

// Umbrella header for the fourier_rpe library.

#include "frpe/attention.hpp"
#include "frpe/core.hpp"
#include "frpe/encodings.hpp"
#include "frpe/fastmult.hpp"
#include "frpe/io.hpp"
#include "frpe/nudft.hpp"
#include "frpe/studies.hpp"
#include "frpe/verify.hpp"
