#ifndef DNM_DNM_HPP
#define DNM_DNM_HPP

#include "dnm/autodiff.hpp"
#include "dnm/config.hpp"
#include "dnm/dualnet.hpp"
#include "dnm/error.hpp"
#include "dnm/evaluation.hpp"
#include "dnm/gradcheck.hpp"
#include "dnm/gradcheck_suite.hpp"
#include "dnm/io.hpp"
#include "dnm/layers.hpp"
#include "dnm/objectives.hpp"
#include "dnm/rng.hpp"
#include "dnm/scene.hpp"
#include "dnm/stereo.hpp"
#include "dnm/tensor.hpp"
#include "dnm/trainer.hpp"

#endif  // DNM_DNM_HPP
