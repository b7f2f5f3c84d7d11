#pragma once

// Umbrella header for the canfuse library.

#include "canfuse/canlog.hpp"
#include "canfuse/checkpoint.hpp"
#include "canfuse/dataset.hpp"
#include "canfuse/error.hpp"
#include "canfuse/experiment.hpp"
#include "canfuse/fusionmodel.hpp"
#include "canfuse/image.hpp"
#include "canfuse/neuralnet.hpp"
#include "canfuse/rng.hpp"
#include "canfuse/sync.hpp"
#include "canfuse/synth.hpp"
#include "canfuse/tensor.hpp"
#include "canfuse/videostream.hpp"
