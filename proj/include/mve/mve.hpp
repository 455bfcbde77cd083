#pragma once

#include "mve/alias_table.hpp"
#include "mve/attention.hpp"
#include "mve/config.hpp"
#include "mve/embedding.hpp"
#include "mve/error.hpp"
#include "mve/eval.hpp"
#include "mve/graph.hpp"
#include "mve/rng.hpp"
#include "mve/synth.hpp"
#include "mve/trainer.hpp"
