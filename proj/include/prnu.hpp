#pragma once

// Camera sensor-noise (PRNU) fingerprint toolkit: extraction filters,
// fingerprint arithmetic, threshold calibration at a fixed false-positive
// rate, block-wise database clustering with rotation merging, and a
// synthetic ground-truth generator.

#include "prnu/calibration.hpp"
#include "prnu/cli.hpp"
#include "prnu/clustering.hpp"
#include "prnu/errors.hpp"
#include "prnu/fft.hpp"
#include "prnu/filters.hpp"
#include "prnu/fingerprint.hpp"
#include "prnu/image_io.hpp"
#include "prnu/imaging.hpp"
#include "prnu/matrix.hpp"
#include "prnu/parallel.hpp"
#include "prnu/rng.hpp"
#include "prnu/simkit.hpp"
#include "prnu/wavelet.hpp"
