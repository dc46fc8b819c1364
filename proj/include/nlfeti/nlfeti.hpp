#pragma once

#include "nlfeti/error.hpp"
#include "nlfeti/lattice.hpp"
#include "nlfeti/decomposition.hpp"
#include "nlfeti/kernel.hpp"
#include "nlfeti/sparse.hpp"
#include "nlfeti/cholesky.hpp"
#include "nlfeti/cg.hpp"
#include "nlfeti/pseudo_inverse.hpp"
#include "nlfeti/schur.hpp"
#include "nlfeti/assembly.hpp"
#include "nlfeti/runtime.hpp"
#include "nlfeti/coarse.hpp"
#include "nlfeti/feti.hpp"
#include "nlfeti/experiments.hpp"
