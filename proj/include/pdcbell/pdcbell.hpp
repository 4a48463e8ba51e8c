#pragma once

#include "errors.hpp"
#include "numeric.hpp"
#include "fock.hpp"
#include "sources.hpp"
#include "loss.hpp"
#include "bell.hpp"
#include "report.hpp"
