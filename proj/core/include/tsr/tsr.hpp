#pragma once

#include "tsr/baselines.hpp"
#include "tsr/block_vector.hpp"
#include "tsr/data.hpp"
#include "tsr/errors.hpp"
#include "tsr/hvp.hpp"
#include "tsr/netcore.hpp"
#include "tsr/optimizer.hpp"
#include "tsr/trsolver.hpp"
