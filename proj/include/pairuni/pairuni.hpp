#pragma once

#include "pairuni/analysis.hpp"
#include "pairuni/clustering.hpp"
#include "pairuni/config.hpp"
#include "pairuni/core.hpp"
#include "pairuni/features.hpp"
#include "pairuni/grpo.hpp"
#include "pairuni/io.hpp"
#include "pairuni/pairing.hpp"
#include "pairuni/policy.hpp"
#include "pairuni/rewards.hpp"
#include "pairuni/rng.hpp"
#include "pairuni/synthetic.hpp"
#include "pairuni/training.hpp"
