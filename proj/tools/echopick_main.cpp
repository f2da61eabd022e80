// SPDX-License-Identifier: Apache-2.0

#include <cstdio>

#include "echopick/echopick.hpp"

int main() {
  std::puts("echopick: cli under construction");
  return 0;
}
