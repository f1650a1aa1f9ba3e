#pragma once

#include "porogen/error.hpp"
#include "porogen/grid.hpp"
#include "porogen/rng.hpp"
#include "porogen/geometry.hpp"
#include "porogen/validate.hpp"
#include "porogen/pde.hpp"
#include "porogen/bnn.hpp"
#include "porogen/train.hpp"
#include "porogen/pbm.hpp"
#include "porogen/dataset.hpp"
#include "porogen/pb.hpp"
#include "porogen/encode.hpp"
#include "porogen/sat.hpp"
#include "porogen/cnf.hpp"
#include "porogen/opb.hpp"
#include "porogen/external.hpp"
#include "porogen/solve.hpp"
