#pragma once

#include "cirphylo/alignment.hpp"
#include "cirphylo/cir.hpp"
#include "cirphylo/error.hpp"
#include "cirphylo/likelihood.hpp"
#include "cirphylo/matrix_exp.hpp"
#include "cirphylo/mgf.hpp"
#include "cirphylo/parallel.hpp"
#include "cirphylo/random.hpp"
#include "cirphylo/simulator.hpp"
#include "cirphylo/special_functions.hpp"
#include "cirphylo/substitution.hpp"
#include "cirphylo/tree.hpp"
