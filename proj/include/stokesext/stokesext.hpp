#pragma once

#include "stokesext/assemble.hpp"
#include "stokesext/extended_system.hpp"
#include "stokesext/manufactured.hpp"
#include "stokesext/mesh.hpp"
#include "stokesext/norms.hpp"
#include "stokesext/operators.hpp"
#include "stokesext/quadrature.hpp"
#include "stokesext/space.hpp"
#include "stokesext/verify.hpp"
