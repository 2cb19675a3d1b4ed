#pragma once

// Umbrella header.

#include "cusp/error.hpp"
#include "cusp/graph.hpp"
#include "cusp/spectrum.hpp"
#include "cusp/transport.hpp"
#include "cusp/orc.hpp"
#include "cusp/cusp_laplacian.hpp"
#include "cusp/stereo.hpp"
#include "cusp/product_manifold.hpp"
#include "cusp/spectral_filter.hpp"
#include "cusp/curvature_encoding.hpp"
#include "cusp/autodiff.hpp"
#include "cusp/tape_stereo.hpp"
#include "cusp/model.hpp"
#include "cusp/train.hpp"
#include "cusp/config.hpp"
