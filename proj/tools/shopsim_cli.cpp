#include "shopsim/cli.hpp"
int main(int argc, char** argv) { return shopsim::run_cli(argc, argv); }
