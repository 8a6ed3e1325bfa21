#pragma once

#include "drmdit/autoenc.hpp"
#include "drmdit/checkpoint.hpp"
#include "drmdit/data.hpp"
#include "drmdit/detect.hpp"
#include "drmdit/error.hpp"
#include "drmdit/itl.hpp"
#include "drmdit/metrics.hpp"
#include "drmdit/ndmath.hpp"
#include "drmdit/robust.hpp"
#include "drmdit/train.hpp"
