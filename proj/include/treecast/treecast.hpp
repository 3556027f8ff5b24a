#ifndef TREECAST_TREECAST_HPP
#define TREECAST_TREECAST_HPP

#include "treecast/analysis.hpp"
#include "treecast/chains.hpp"
#include "treecast/defaults.hpp"
#include "treecast/distributions.hpp"
#include "treecast/errors.hpp"
#include "treecast/ext_real.hpp"
#include "treecast/family.hpp"
#include "treecast/io.hpp"
#include "treecast/ldp.hpp"
#include "treecast/model.hpp"
#include "treecast/random.hpp"
#include "treecast/treesim.hpp"

#endif  // TREECAST_TREECAST_HPP
