// Umbrella header.
#pragma once

#include "securelearn/attacks.hpp"
#include "securelearn/common.hpp"
#include "securelearn/dataset.hpp"
#include "securelearn/fort.hpp"
#include "securelearn/harness.hpp"
#include "securelearn/kmeans.hpp"
#include "securelearn/metrics.hpp"
#include "securelearn/mlp.hpp"
#include "securelearn/models.hpp"
#include "securelearn/naive_bayes.hpp"
#include "securelearn/sanitizer.hpp"
#include "securelearn/serialization.hpp"
#include "securelearn/tree.hpp"
#include "securelearn/zscore.hpp"
