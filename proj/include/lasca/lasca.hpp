#pragma once

#include "lasca/arch_search.hpp"
#include "lasca/cell_library.hpp"
#include "lasca/cfst.hpp"
#include "lasca/config.hpp"
#include "lasca/dataset.hpp"
#include "lasca/design.hpp"
#include "lasca/design_generator.hpp"
#include "lasca/design_io.hpp"
#include "lasca/detector.hpp"
#include "lasca/error.hpp"
#include "lasca/experiment.hpp"
#include "lasca/features.hpp"
#include "lasca/io.hpp"
#include "lasca/mlp.hpp"
#include "lasca/parallel.hpp"
#include "lasca/paths.hpp"
#include "lasca/rng.hpp"
#include "lasca/silicon.hpp"
#include "lasca/silicon_io.hpp"
#include "lasca/sta.hpp"
#include "lasca/stats.hpp"
#include "lasca/testability.hpp"
#include "lasca/trainer.hpp"
#include "lasca/trojan.hpp"
#include "lasca/trojan_plan.hpp"
