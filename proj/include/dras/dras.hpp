#pragma once

#include "dras/balance.hpp"
#include "dras/error.hpp"
#include "dras/ingest.hpp"
#include "dras/io_analysis.hpp"
#include "dras/metrics.hpp"
#include "dras/tensor.hpp"
