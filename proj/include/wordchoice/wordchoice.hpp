#pragma once

#include "wordchoice/baselines/ngram.hpp"
#include "wordchoice/baselines/rnnlm.hpp"
#include "wordchoice/bilstm.hpp"
#include "wordchoice/checkpoint.hpp"
#include "wordchoice/corpus.hpp"
#include "wordchoice/error.hpp"
#include "wordchoice/eval.hpp"
#include "wordchoice/hyperparams.hpp"
#include "wordchoice/numkernel.hpp"
#include "wordchoice/pipeline.hpp"
#include "wordchoice/posfilter.hpp"
#include "wordchoice/suggestion.hpp"
#include "wordchoice/training.hpp"
