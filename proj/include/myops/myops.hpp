#pragma once

#include "myops/augment.hpp"
#include "myops/blocks.hpp"
#include "myops/common.hpp"
#include "myops/container.hpp"
#include "myops/decoder.hpp"
#include "myops/gradcheck.hpp"
#include "myops/inference.hpp"
#include "myops/metrics.hpp"
#include "myops/morphology.hpp"
#include "myops/nn.hpp"
#include "myops/optimizer.hpp"
#include "myops/phantom.hpp"
#include "myops/pipeline.hpp"
#include "myops/preprocess.hpp"
#include "myops/rng.hpp"
#include "myops/tensor.hpp"
#include "myops/trainer.hpp"
#include "myops/volume.hpp"
