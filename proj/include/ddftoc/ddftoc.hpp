#pragma once

#include "config.hpp"
#include "snapshot.hpp"
#include "validate.hpp"
#include "version.hpp"
