// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "esser/error.hpp"
#include "esser/eval.hpp"
#include "esser/fft.hpp"
#include "esser/loss.hpp"
#include "esser/mixer.hpp"
#include "esser/pit.hpp"
#include "esser/rng.hpp"
#include "esser/sigcore.hpp"
#include "esser/stft.hpp"
#include "esser/toyopt.hpp"
#include "esser/tuner.hpp"
#include "esser/wav.hpp"
