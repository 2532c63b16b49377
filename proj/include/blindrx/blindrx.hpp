#pragma once

#include "blindrx/types.hpp"
#include "blindrx/fft.hpp"
#include "blindrx/rng.hpp"
#include "blindrx/sigcore.hpp"
#include "blindrx/filter.hpp"
#include "blindrx/datagen.hpp"
#include "blindrx/dataset_io.hpp"
#include "blindrx/blindest.hpp"
#include "blindrx/recover.hpp"
#include "blindrx/metrics.hpp"
#include "blindrx/records_io.hpp"
#include "blindrx/pipeline.hpp"
