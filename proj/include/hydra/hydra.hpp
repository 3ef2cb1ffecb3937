#pragma once

#include "hydra/config.hpp"
#include "hydra/count_sketch.hpp"
#include "hydra/data_model.hpp"
#include "hydra/error.hpp"
#include "hydra/hash.hpp"
#include "hydra/hydra_sketch.hpp"
#include "hydra/io.hpp"
#include "hydra/oracle.hpp"
#include "hydra/statistics.hpp"
#include "hydra/universal_sketch.hpp"
#include "hydra/workload.hpp"
