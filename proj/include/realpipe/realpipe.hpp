#pragma once

#include "realpipe/bench.hpp"
#include "realpipe/bundle.hpp"
#include "realpipe/commands.hpp"
#include "realpipe/config.hpp"
#include "realpipe/errors.hpp"
#include "realpipe/explainer.hpp"
#include "realpipe/explanation.hpp"
#include "realpipe/model.hpp"
#include "realpipe/realapp.hpp"
#include "realpipe/rng.hpp"
#include "realpipe/serialize.hpp"
#include "realpipe/tabular.hpp"
#include "realpipe/transform.hpp"
