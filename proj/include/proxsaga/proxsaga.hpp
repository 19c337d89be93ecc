#pragma once

#include "proxsaga/async.hpp"
#include "proxsaga/diagnostics.hpp"
#include "proxsaga/error.hpp"
#include "proxsaga/fista.hpp"
#include "proxsaga/loss.hpp"
#include "proxsaga/partition.hpp"
#include "proxsaga/penalty.hpp"
#include "proxsaga/problem.hpp"
#include "proxsaga/random.hpp"
#include "proxsaga/saga.hpp"
#include "proxsaga/sparse_data.hpp"
#include "proxsaga/synthetic.hpp"
#include "proxsaga/trace_io.hpp"
#include "proxsaga/verify.hpp"
