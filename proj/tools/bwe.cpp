#include "bwe/cli.hpp"

int main(int argc, char** argv) { return bwe::run_cli(argc, argv); }
