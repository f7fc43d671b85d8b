#pragma once

// libtorch's logging header defines CHECK-style macros that collide with
// doctest's; pull it in first and drop its versions.
#include <torch/torch.h>

#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LT
#undef CHECK_LE
#undef CHECK_GT
#undef CHECK_GE

#include <doctest.h>
