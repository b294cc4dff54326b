#pragma once

#include "facade/error.hpp"
#include "facade/evaluation.hpp"
#include "facade/geometry.hpp"
#include "facade/image.hpp"
#include "facade/ingest.hpp"
#include "facade/pipeline.hpp"
#include "facade/plane_map.hpp"
#include "facade/postprocess.hpp"
#include "facade/report.hpp"
#include "facade/synth.hpp"
