#include <iostream>

#include "vecot/selftest.hpp"

int main() {
  bool all = true;
  for (const auto& r : vecot::selftest::run_acceptance()) {
    std::cout << vecot::selftest::format_line(r) << std::endl;
    all = all && r.pass;
  }
  std::cout << (all ? "all criteria passed" : "some criteria FAILED") << std::endl;
  return all ? 0 : 1;
}
