#pragma once

#include "chronodivide/analysis.hpp"
#include "chronodivide/config.hpp"
#include "chronodivide/corpus.hpp"
#include "chronodivide/error.hpp"
#include "chronodivide/features.hpp"
#include "chronodivide/io.hpp"
#include "chronodivide/matrix.hpp"
#include "chronodivide/parallel.hpp"
#include "chronodivide/pipeline.hpp"
#include "chronodivide/rng.hpp"
#include "chronodivide/selection.hpp"
#include "chronodivide/svg.hpp"
#include "chronodivide/svm.hpp"
#include "chronodivide/synthetic.hpp"
#include "chronodivide/utf8.hpp"
