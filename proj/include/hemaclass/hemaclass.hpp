#pragma once

#include "hemaclass/backbone.hpp"
#include "hemaclass/classifiers/head.hpp"
#include "hemaclass/data_model.hpp"
#include "hemaclass/experiment.hpp"
#include "hemaclass/features.hpp"
#include "hemaclass/metrics.hpp"
#include "hemaclass/model_selection.hpp"
#include "hemaclass/pipeline.hpp"
#include "hemaclass/preprocessing.hpp"
