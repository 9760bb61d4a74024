#pragma once

#include "varpro/bounds.hpp"
#include "varpro/derivative_check.hpp"
#include "varpro/direct.hpp"
#include "varpro/errors.hpp"
#include "varpro/genvarpro.hpp"
#include "varpro/linear_operator.hpp"
#include "varpro/linops.hpp"
#include "varpro/lsqr.hpp"
#include "varpro/model.hpp"
#include "varpro/reduced.hpp"
#include "varpro/schedule.hpp"
