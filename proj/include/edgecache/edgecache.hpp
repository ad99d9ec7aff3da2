#pragma once

#include "edgecache/cache_model.hpp"
#include "edgecache/combinatorics.hpp"
#include "edgecache/delay.hpp"
#include "edgecache/energy.hpp"
#include "edgecache/error.hpp"
#include "edgecache/experiments.hpp"
#include "edgecache/linalg.hpp"
#include "edgecache/popularity.hpp"
#include "edgecache/random.hpp"
#include "edgecache/rank1.hpp"
#include "edgecache/sdp.hpp"
#include "edgecache/wireless.hpp"
