#pragma once

#include "kderodeo/matrix.hpp"
#include "kderodeo/random.hpp"
#include "kderodeo/parallel.hpp"
#include "kderodeo/kernel_math.hpp"
#include "kderodeo/rodeo.hpp"
#include "kderodeo/classifier.hpp"
#include "kderodeo/feature_selection.hpp"
#include "kderodeo/dataset.hpp"
#include "kderodeo/synthetic.hpp"
#include "kderodeo/dataset_io.hpp"
#include "kderodeo/planner.hpp"
#include "kderodeo/evaluation.hpp"
#include "kderodeo/model_io.hpp"
