#ifndef UQGAZE_UQGAZE_HPP
#define UQGAZE_UQGAZE_HPP

#include "adam.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "corruptions.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "image.hpp"
#include "loss.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "ops.hpp"
#include "parallel.hpp"
#include "render.hpp"
#include "sample.hpp"
#include "svg_chart.hpp"
#include "tensor.hpp"
#include "train.hpp"

#endif
