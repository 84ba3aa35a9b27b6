#pragma once

#include "bivarps/bivariate_surv.hpp"
#include "bivarps/data_model.hpp"
#include "bivarps/error.hpp"
#include "bivarps/gee.hpp"
#include "bivarps/pseudo.hpp"
#include "bivarps/simulate.hpp"
#include "bivarps/timepoints.hpp"
#include "bivarps/univariate.hpp"
