#ifndef SMOOTHSENSE_SMOOTHSENSE_HPP
#define SMOOTHSENSE_SMOOTHSENSE_HPP

#include "smoothsense/config.hpp"
#include "smoothsense/data_io.hpp"
#include "smoothsense/errors.hpp"
#include "smoothsense/gradients.hpp"
#include "smoothsense/graph.hpp"
#include "smoothsense/losses.hpp"
#include "smoothsense/metrics.hpp"
#include "smoothsense/pipeline.hpp"
#include "smoothsense/report.hpp"
#include "smoothsense/sensor.hpp"
#include "smoothsense/spectral.hpp"
#include "smoothsense/train.hpp"

#endif  // SMOOTHSENSE_SMOOTHSENSE_HPP
