#pragma once

#include "neurosense/abstention.hpp"
#include "neurosense/audit.hpp"
#include "neurosense/bundle.hpp"
#include "neurosense/csv.hpp"
#include "neurosense/domain.hpp"
#include "neurosense/ensemble.hpp"
#include "neurosense/error.hpp"
#include "neurosense/external.hpp"
#include "neurosense/forest.hpp"
#include "neurosense/logistic.hpp"
#include "neurosense/metrics.hpp"
#include "neurosense/neutrosophic.hpp"
#include "neurosense/pipeline.hpp"
#include "neurosense/preprocess.hpp"
#include "neurosense/service.hpp"
