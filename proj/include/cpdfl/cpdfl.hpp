#pragma once

#include "cpdfl/tncore.hpp"
#include "cpdfl/features.hpp"
#include "cpdfl/model.hpp"
#include "cpdfl/model_io.hpp"
#include "cpdfl/lambda_reg.hpp"
#include "cpdfl/als.hpp"
#include "cpdfl/data.hpp"
#include "cpdfl/bench.hpp"
