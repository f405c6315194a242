#include <catch2/catch_amalgamated.hpp>
#include "stokesext/stokesext.hpp"
TEST_CASE("placeholder") { CHECK(true); }
