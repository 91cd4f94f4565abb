#pragma once

#include "ina/errors.hpp"
#include "ina/info_math.hpp"
#include "ina/corpus.hpp"
#include "ina/dataset_io.hpp"
#include "ina/model.hpp"
#include "ina/model_io.hpp"
#include "ina/training.hpp"
#include "ina/bench.hpp"
