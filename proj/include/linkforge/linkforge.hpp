#pragma once

#include "linkforge/adapters.hpp"
#include "linkforge/errors.hpp"
#include "linkforge/eval.hpp"
#include "linkforge/gateway.hpp"
#include "linkforge/kb.hpp"
#include "linkforge/pipeline.hpp"
#include "linkforge/prompts.hpp"
#include "linkforge/rerank.hpp"
#include "linkforge/retrieval.hpp"
#include "linkforge/select.hpp"
#include "linkforge/util.hpp"
