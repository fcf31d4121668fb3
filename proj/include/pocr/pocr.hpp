#pragma once

#include "pocr/codec.hpp"
#include "pocr/error.hpp"
#include "pocr/harness.hpp"
#include "pocr/image.hpp"
#include "pocr/mlp.hpp"
#include "pocr/segment.hpp"
