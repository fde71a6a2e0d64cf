#pragma once

#include "rsh/binary_io.hpp"
#include "rsh/error.hpp"
#include "rsh/exec.hpp"
#include "rsh/generate.hpp"
#include "rsh/matrix_market.hpp"
#include "rsh/metrics.hpp"
#include "rsh/parallel.hpp"
#include "rsh/partition.hpp"
#include "rsh/reorder.hpp"
#include "rsh/rstile.hpp"
#include "rsh/sparse.hpp"
