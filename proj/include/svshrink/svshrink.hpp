#pragma once

// Umbrella header: matrix denoising by singular-value shrinkage with
// data-driven tuning (SURE, GSURE, universal threshold) plus the Monte Carlo
// benchmark harness and file formats.

#include "svshrink/errors.hpp"
#include "svshrink/io.hpp"
#include "svshrink/marchenko_pastur.hpp"
#include "svshrink/rng.hpp"
#include "svshrink/selection.hpp"
#include "svshrink/shrinkers.hpp"
#include "svshrink/simbench.hpp"
#include "svshrink/spectral.hpp"
