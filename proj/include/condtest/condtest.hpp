#pragma once

#include "condtest/adaptive.hpp"
#include "condtest/adversarial.hpp"
#include "condtest/bucketing.hpp"
#include "condtest/distribution.hpp"
#include "condtest/errors.hpp"
#include "condtest/learner.hpp"
#include "condtest/nonadaptive.hpp"
#include "condtest/oracle.hpp"
#include "condtest/ratio_tree.hpp"
#include "condtest/rng.hpp"
