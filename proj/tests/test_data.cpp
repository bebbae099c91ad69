#include <doctest.h>
TEST_SUITE("data") {}
