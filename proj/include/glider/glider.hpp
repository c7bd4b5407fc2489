#pragma once

#include "glider/core.hpp"
#include "glider/json_io.hpp"
#include "glider/taxonomy.hpp"
#include "glider/prompting.hpp"
#include "glider/parsing.hpp"
#include "glider/llm_client.hpp"
#include "glider/http_transport.hpp"
#include "glider/datagen.hpp"
#include "glider/metrics.hpp"
#include "glider/bench.hpp"
#include "glider/loss.hpp"
#include "glider/service.hpp"
