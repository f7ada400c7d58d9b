#ifndef SMATTACK_SMATTACK_HPP
#define SMATTACK_SMATTACK_HPP

#include "smattack/attack.hpp"
#include "smattack/candidates.hpp"
#include "smattack/def_io.hpp"
#include "smattack/feature_cache.hpp"
#include "smattack/features.hpp"
#include "smattack/fragments.hpp"
#include "smattack/geometry.hpp"
#include "smattack/layout.hpp"
#include "smattack/library.hpp"
#include "smattack/model_io.hpp"
#include "smattack/native_io.hpp"
#include "smattack/nn.hpp"
#include "smattack/raster.hpp"
#include "smattack/synth.hpp"
#include "smattack/tech.hpp"
#include "smattack/train.hpp"

#endif
