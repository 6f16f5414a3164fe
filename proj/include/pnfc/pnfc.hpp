// Copyright The pnfc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pnfc/errors.hpp"
#include "pnfc/numerics.hpp"
#include "pnfc/cmat.hpp"
#include "pnfc/spectra.hpp"
#include "pnfc/jet.hpp"
#include "pnfc/funcspace.hpp"
#include "pnfc/calculus.hpp"
#include "pnfc/approx.hpp"
