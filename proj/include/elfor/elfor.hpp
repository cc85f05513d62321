#pragma once

#include "elfor/anomaly.hpp"
#include "elfor/error.hpp"
#include "elfor/fingerprint.hpp"
#include "elfor/ingest.hpp"
#include "elfor/parallel.hpp"
#include "elfor/pipeline.hpp"
#include "elfor/plot.hpp"
#include "elfor/random.hpp"
#include "elfor/report.hpp"
#include "elfor/rigging.hpp"
#include "elfor/simplex.hpp"
#include "elfor/stats.hpp"
#include "elfor/stuffing.hpp"
#include "elfor/synth.hpp"
