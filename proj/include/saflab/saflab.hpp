#pragma once

#include "saflab/codec.hpp"
#include "saflab/data.hpp"
#include "saflab/errors.hpp"
#include "saflab/harness.hpp"
#include "saflab/injector.hpp"
#include "saflab/network.hpp"
#include "saflab/optim.hpp"
#include "saflab/rng.hpp"
#include "saflab/saf.hpp"
#include "saflab/tensor.hpp"
