#pragma once

#include "size2depth/annotation.hpp"
#include "size2depth/crf.hpp"
#include "size2depth/error.hpp"
#include "size2depth/io.hpp"
#include "size2depth/metrics.hpp"
#include "size2depth/raster.hpp"
#include "size2depth/study.hpp"
