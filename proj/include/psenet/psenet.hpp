#pragma once

#include "psenet/core.hpp"
#include "psenet/eval.hpp"
#include "psenet/geometry.hpp"
#include "psenet/io.hpp"
#include "psenet/labels.hpp"
#include "psenet/loss.hpp"
#include "psenet/pse.hpp"
#include "psenet/render.hpp"
#include "psenet/rng.hpp"
#include "psenet/synth.hpp"
