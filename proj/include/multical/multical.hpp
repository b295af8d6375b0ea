#pragma once

#include "multical/bounds.hpp"
#include "multical/calibration.hpp"
#include "multical/csv.hpp"
#include "multical/dataset.hpp"
#include "multical/error.hpp"
#include "multical/experiment.hpp"
#include "multical/linalg.hpp"
#include "multical/model.hpp"
#include "multical/oracle.hpp"
#include "multical/rademacher.hpp"
#include "multical/rng.hpp"
#include "multical/splitter.hpp"
#include "multical/trainers.hpp"
