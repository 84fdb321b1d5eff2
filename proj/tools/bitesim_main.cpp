#include "bitesim/cli.hpp"

int main(int argc, char** argv) { return bitesim::run_cli(argc, argv); }
