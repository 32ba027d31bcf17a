#pragma once

#include "lidaf/affinity.hpp"
#include "lidaf/bgmm.hpp"
#include "lidaf/cca.hpp"
#include "lidaf/clustering.hpp"
#include "lidaf/error.hpp"
#include "lidaf/fusion.hpp"
#include "lidaf/io.hpp"
#include "lidaf/matrix.hpp"
#include "lidaf/numkernel.hpp"
#include "lidaf/omics.hpp"
#include "lidaf/pipeline.hpp"
#include "lidaf/preprocess.hpp"
#include "lidaf/rng.hpp"
#include "lidaf/survival.hpp"
#include "lidaf/synthgen.hpp"
