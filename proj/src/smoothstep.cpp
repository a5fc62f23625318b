#include "clf/smoothstep.hpp"

// header-only; translation unit kept so the target layout stays uniform
