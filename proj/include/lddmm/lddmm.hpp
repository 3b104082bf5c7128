#pragma once

// Diffeomorphic image registration by velocity-field optimization: grids and
// fields, band-limited spectral algebra, periodic spline interpolation, RK4
// and semi-Lagrangian transport, three model formulations with Gauss-Newton
// solvers, quality metrics, field I/O, and synthetic fixtures.

#include "core.hpp"
#include "fft.hpp"
#include "interp.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "optimizer.hpp"
#include "spectral.hpp"
#include "synth.hpp"
#include "transport.hpp"
#include "variants.hpp"
