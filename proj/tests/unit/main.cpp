#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"
#include "edu4fd/log.hpp"

int main(int argc, char** argv) {
  edu4fd::log::set_quiet(true);
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
