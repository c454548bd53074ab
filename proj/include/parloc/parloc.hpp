#pragma once

#include "parloc/error.hpp"
#include "parloc/core_types.hpp"
#include "parloc/normal.hpp"
#include "parloc/descriptor_loss.hpp"
#include "parloc/rtree_index.hpp"
#include "parloc/forest_io.hpp"
#include "parloc/map_database.hpp"
#include "parloc/global_retrieval.hpp"
#include "parloc/fusion_matcher.hpp"
#include "parloc/pose_solver.hpp"
#include "parloc/text_io.hpp"
#include "parloc/ingestion.hpp"
#include "parloc/image.hpp"
#include "parloc/localizer.hpp"
