#include <gtest/gtest.h>

#include "nfcl/runtime.hpp"

int main(int argc, char** argv) {
  nfcl::configure_allocator();
  ::testing::InitGoogleTest(&argc, argv);
  return RUN_ALL_TESTS();
}
