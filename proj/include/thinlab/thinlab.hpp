#pragma once

#include "thinlab/birkhoff.hpp"
#include "thinlab/cli.hpp"
#include "thinlab/congruence.hpp"
#include "thinlab/decomposition.hpp"
#include "thinlab/expander.hpp"
#include "thinlab/experiments.hpp"
#include "thinlab/flattening.hpp"
#include "thinlab/group_mod_q.hpp"
#include "thinlab/io.hpp"
#include "thinlab/measures.hpp"
#include "thinlab/schottky.hpp"
#include "thinlab/symbolic.hpp"
#include "thinlab/transfer.hpp"
