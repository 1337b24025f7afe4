#pragma once

#include "binomial.hpp"
#include "cascade.hpp"
#include "clt.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "intervene.hpp"
#include "limits.hpp"
#include "model.hpp"
#include "netgen.hpp"
#include "quadrature.hpp"
#include "risk.hpp"
#include "rng.hpp"
#include "spec_io.hpp"
