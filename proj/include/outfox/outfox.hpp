#pragma once

// Umbrella header. http_backend.hpp is not included; it pulls in the HTTP
// and TLS stack and is only needed for live endpoints.

#include "outfox/analysis.hpp"
#include "outfox/attacker.hpp"
#include "outfox/backend.hpp"
#include "outfox/corpus.hpp"
#include "outfox/detector.hpp"
#include "outfox/error.hpp"
#include "outfox/eval.hpp"
#include "outfox/hashing.hpp"
#include "outfox/ngram.hpp"
#include "outfox/parallel.hpp"
#include "outfox/prompting.hpp"
#include "outfox/random.hpp"
#include "outfox/retrieval.hpp"
#include "outfox/run_config.hpp"
#include "outfox/stat_detectors.hpp"
