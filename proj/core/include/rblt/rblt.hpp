#pragma once

#include "rblt/checkpoint.hpp"
#include "rblt/corpus.hpp"
#include "rblt/eval.hpp"
#include "rblt/model.hpp"
#include "rblt/sampler.hpp"
#include "rblt/trainer.hpp"
#include "rblt/triple_io.hpp"
#include "rblt/types.hpp"
#include "rblt/vocabulary.hpp"
