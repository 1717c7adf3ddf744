#include "tslpm/cli.hpp"

int main(int argc, char** argv) { return tslpm::run_cli(argc, argv); }
